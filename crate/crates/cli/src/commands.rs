use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use studperm::classic::{box_pierce, ljung_box};
use studperm::data::{load_returns, load_series, portmanteau_pipeline, PortmanteauConfig};
use studperm::harness::{
    density_grid, figure4_h_values, kde_curve, local_power_curve, pairs_csv, power_curve_csv,
    preset_studentizer, qq_pvalues, run_experiments, table_preset, ExperimentSpec, PowerSettings,
    RejectionTable, Sidedness, TestKind, FIGURE4_SAMPLE_SIZES, TABLE_SAMPLE_SIZES,
};
use studperm::perm::{
    permutation_test, Autocorrelation, PValues, PermutationScheme, StudentizedAutocorrelation,
    StudentizedAutocovariance, DEFAULT_PERMUTATIONS,
};
use studperm::process::ProcessConfig;
use studperm::rng;
use studperm::series::TimeSeries;
use studperm::studentizer::{studentized_cov, studentized_rho, StudentizerConfig};

use crate::{
    Cli, Command, Common, Format, McTableArgs, Method, PortmanteauArgs, PowerCurveArgs,
    ReturnsArgs, SimulateArgs, TestArgs,
};

const DEFAULT_ALPHA: f64 = 0.05;

pub fn run(cli: Cli) -> Result<()> {
    let common = cli.common;
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    let text = match &cli.command {
        Command::Test(a) => test(&common, a)?,
        Command::Portmanteau(a) => portmanteau(&common, a)?,
        Command::Simulate(a) => simulate(&common, a)?,
        Command::McTable(a) => mc_table(&common, a)?,
        Command::PowerCurve(a) => power_curve(&common, a)?,
        Command::Returns(a) => returns(&common, a)?,
    }
    .render(common.format)?;
    match &common.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// A command's result in both output formats; `default` is used without `--format`.
struct Output {
    json: Value,
    csv: String,
    default: Format,
}

impl Output {
    fn render(self, format: Option<Format>) -> Result<String> {
        Ok(match format.unwrap_or(self.default) {
            Format::Json => serde_json::to_string_pretty(&self.json)? + "\n",
            Format::Csv => self.csv,
        })
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rng::entropy_seed();
        eprintln!("seed: {s}");
        s
    })
}

fn studentizer(common: &Common, base: StudentizerConfig) -> StudentizerConfig {
    StudentizerConfig {
        bandwidth: common.bn_rule.unwrap_or(base.bandwidth),
        epsilon: common.epsilon.unwrap_or(base.epsilon),
        ..base
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Studentized => "studentized",
        Method::Unstudentized => "unstudentized",
        Method::Autocovariance => "autocovariance",
        Method::LjungBox => "ljung-box",
        Method::BoxPierce => "box-pierce",
    }
}

fn sided_name(s: Sidedness) -> &'static str {
    match s {
        Sidedness::OneSidedGreater => "greater",
        Sidedness::TwoSided => "two-sided",
    }
}

fn test(common: &Common, a: &TestArgs) -> Result<Output> {
    let x = load_series(&a.input, a.column.as_deref())?;
    let alpha = common.alpha.unwrap_or(DEFAULT_ALPHA);
    let sided = common.sided.unwrap_or_default();
    let mut cfg = studentizer(common, StudentizerConfig::default().with_lag(a.lag));
    if let Some(min) = a.min_len {
        cfg.min_len = min;
    }
    let method = method_name(a.method);

    let (seed, scheme_json, statistic, p_value, reject, result, studentized) = match a.method {
        Method::LjungBox | Method::BoxPierce => {
            let s = if a.method == Method::LjungBox {
                ljung_box(x.values(), a.lag)?
            } else {
                box_pierce(x.values(), a.lag)?
            };
            let reject = s.p_value <= alpha;
            (None, Value::Null, s.q, s.p_value, reject, serde_json::to_value(s)?, Value::Null)
        }
        _ => {
            let (seed, scheme) = if a.enumerate {
                (None, PermutationScheme::full_enumeration())
            } else {
                let seed = resolve_seed(common.seed);
                let b = common.permutations.unwrap_or(DEFAULT_PERMUTATIONS);
                (Some(seed), PermutationScheme::monte_carlo(b, seed))
            };
            let (res, stud) = match a.method {
                Method::Studentized => (
                    permutation_test(x.values(), &StudentizedAutocorrelation(cfg), &scheme, alpha)?,
                    serde_json::to_value(studentized_rho(x.values(), &cfg)?)?,
                ),
                Method::Autocovariance => (
                    permutation_test(x.values(), &StudentizedAutocovariance(cfg), &scheme, alpha)?,
                    serde_json::to_value(studentized_cov(x.values(), &cfg)?)?,
                ),
                _ => (
                    permutation_test(x.values(), &Autocorrelation { lag: a.lag }, &scheme, alpha)?,
                    Value::Null,
                ),
            };
            let p = sided.pick(&PValues {
                greater: res.p_greater,
                less: res.p_less,
                two_sided: res.p_two_sided,
            });
            (
                seed,
                serde_json::to_value(scheme)?,
                res.statistic,
                p,
                p <= alpha,
                serde_json::to_value(res)?,
                stud,
            )
        }
    };

    let mut json = json!({
        "seed": seed,
        "method": method,
        "lag": a.lag,
        "n": x.len(),
        "alpha": alpha,
        "sided": sided_name(sided),
        "statistic": statistic,
        "p_value": p_value,
        "reject": reject,
        "result": result,
    });
    if !scheme_json.is_null() {
        json["scheme"] = scheme_json;
    }
    if !studentized.is_null() {
        json["studentized"] = studentized;
    }
    let csv = format!(
        "method,lag,n,statistic,p_value,reject\n{method},{},{},{statistic},{p_value},{reject}\n",
        a.lag,
        x.len()
    );
    Ok(Output {
        json,
        csv,
        default: Format::Json,
    })
}

fn portmanteau_config(common: &Common, lags: usize, correction: studperm::multiple::Correction) -> PortmanteauConfig {
    let defaults = PortmanteauConfig::default();
    PortmanteauConfig {
        lags,
        permutations: common.permutations.unwrap_or(defaults.permutations),
        seed: resolve_seed(common.seed),
        alpha: common.alpha.unwrap_or(defaults.alpha),
        correction,
        sidedness: common.sided.unwrap_or(defaults.sidedness),
        studentizer: studentizer(common, defaults.studentizer),
    }
}

fn file_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into())
}

fn portmanteau(common: &Common, a: &PortmanteauArgs) -> Result<Output> {
    let x = load_series(&a.input, a.column.as_deref())?;
    let cfg = portmanteau_config(common, a.lags, a.correction);
    let report = portmanteau_pipeline(&x, &cfg)?;
    let label = a.label.clone().unwrap_or_else(|| file_label(&a.input));
    Ok(Output {
        csv: report.to_csv(&label),
        json: json!({
            "seed": cfg.seed,
            "n": x.len(),
            "report": serde_json::to_value(&report)?,
        }),
        default: Format::Json,
    })
}

fn returns(common: &Common, a: &ReturnsArgs) -> Result<Output> {
    let r = load_returns(&a.input, &a.date_column, &a.price_column)?;
    let cfg = portmanteau_config(common, a.lags, a.correction);
    let report = portmanteau_pipeline(&r.returns, &cfg)?;
    let label = a.label.clone().unwrap_or_else(|| file_label(&a.input));
    Ok(Output {
        csv: report.to_csv(&label),
        json: json!({
            "seed": cfg.seed,
            "n": r.returns.len(),
            "source": serde_json::to_value(&r.source)?,
            "first_date": r.dates.first(),
            "last_date": r.dates.last(),
            "report": serde_json::to_value(&report)?,
        }),
        default: Format::Json,
    })
}

fn process_from_flags(a: &SimulateArgs) -> Result<ProcessConfig> {
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(ProcessConfig::parse(&text)?);
    }
    Ok(ProcessConfig {
        kind: a.kind.clone().unwrap_or_default(),
        m: a.m,
        power: a.power,
        h: a.h,
        phi: a.phi,
        rho: a.rho,
        ar: a.ar.clone(),
        ma: a.ma.clone(),
        innovation: a.innovation.clone(),
        df: a.df,
        burn_in: a.burn_in,
        seed: None,
    })
}

fn simulate(common: &Common, a: &SimulateArgs) -> Result<Output> {
    let mut process = process_from_flags(a)?;
    let spec = process.to_spec()?;
    let seed = match common.seed.or(process.seed) {
        Some(s) => s,
        None => resolve_seed(None),
    };
    process.seed = Some(seed);
    let x: TimeSeries = spec.simulate(a.n, seed)?;
    let mut csv = String::from("x\n");
    for v in x.values() {
        let _ = writeln!(csv, "{v}");
    }
    Ok(Output {
        json: json!({
            "seed": seed,
            "n": a.n,
            "label": spec.label(),
            "process": serde_json::to_value(&process)?,
            "values": x.values(),
        }),
        csv,
        default: Format::Json,
    })
}

fn mc_table(common: &Common, a: &McTableArgs) -> Result<Output> {
    let seed = resolve_seed(common.seed);
    let mut specs = match (&a.preset, &a.config) {
        (Some(name), _) => table_preset(name, a.scale, seed)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let process = ProcessConfig::parse(&text)?.to_spec()?;
            let tests = a.tests.clone().unwrap_or_else(|| TestKind::ALL.to_vec());
            vec![ExperimentSpec {
                replications: a.scale.replications(),
                permutations: a.scale.permutations(),
                seed,
                studentizer: preset_studentizer(),
                ..ExperimentSpec::new(process, TABLE_SAMPLE_SIZES.to_vec(), tests)
            }]
        }
        (None, None) => bail!("either a preset or a process config is required"),
    };
    for s in &mut specs {
        if let Some(r) = a.replications {
            s.replications = r;
        }
        if let Some(b) = common.permutations {
            s.permutations = b;
        }
        if let Some(sizes) = &a.sizes {
            s.sample_sizes = sizes.clone();
        }
        if let Some(alpha) = common.alpha {
            s.alpha = alpha;
        }
        if let Some(sided) = common.sided {
            s.sidedness = sided;
        }
        s.studentizer = studentizer(common, s.studentizer.with_lag(a.lag));
    }
    let table = run_experiments(&specs)?;
    if let Some(dir) = &a.plot_dir {
        write_plot_data(&table, dir)?;
    }
    Ok(Output {
        csv: table.to_csv(),
        json: json!({
            "seed": seed,
            "preset": a.preset,
            "table": serde_json::to_value(&table)?,
        }),
        default: Format::Csv,
    })
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect::<String>()
        .split('-')
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("-")
}

/// Per cell: a kernel density of the observed statistics and a uniform QQ
/// of the p-values. Cells whose statistics have no spread get only the QQ file.
fn write_plot_data(table: &RejectionTable, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for row in &table.rows {
        let test = serde_json::to_value(row.test)?;
        let stem = format!("{}_{}", slug(&row.process), test.as_str().unwrap_or("test"));
        for cell in &row.cells {
            let base = dir.join(format!("{stem}_n{}", cell.n));
            if let Ok(grid) = density_grid(&cell.statistics, 200) {
                let kde = kde_curve(&cell.statistics, &grid)?;
                let path = base.with_extension("density.csv");
                fs::write(&path, pairs_csv(("statistic", "density"), &kde))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if !cell.p_values.is_empty() {
                let qq = qq_pvalues(&cell.p_values)?;
                let path = base.with_extension("qq.csv");
                fs::write(&path, pairs_csv(("uniform", "p_value"), &qq))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}

fn power_curve(common: &Common, a: &PowerCurveArgs) -> Result<Output> {
    if common.sided == Some(Sidedness::TwoSided) {
        bail!("local power curves are for the one-sided test");
    }
    let (hs, ns) = match &a.preset {
        Some(_) => (figure4_h_values(), FIGURE4_SAMPLE_SIZES.to_vec()),
        None => (a.h.clone().unwrap_or_default(), a.n.clone().unwrap_or_default()),
    };
    let seed = resolve_seed(common.seed);
    let settings = PowerSettings {
        replications: a.replications.unwrap_or(a.scale.replications()),
        permutations: common.permutations.unwrap_or(a.scale.permutations()),
        alpha: common.alpha.unwrap_or(DEFAULT_ALPHA),
        seed,
        studentizer: studentizer(common, StudentizerConfig::default()),
    };
    let mut points = Vec::new();
    for n in ns {
        points.extend(local_power_curve(&hs, n, &settings)?);
    }
    Ok(Output {
        csv: power_curve_csv(&points),
        json: json!({
            "seed": seed,
            "replications": settings.replications,
            "permutations": settings.permutations,
            "alpha": settings.alpha,
            "points": serde_json::to_value(&points)?,
        }),
        default: Format::Json,
    })
}

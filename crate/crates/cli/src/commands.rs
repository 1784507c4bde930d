use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Map, Value};

use polynet::activation::{relu, rho_checked, sigma};
use polynet::exact_rep::{compile_polynomial, relu_to_rho, verify_exact_representation_with, width_bound, SymbolicVerdict};
use polynet::complexity::{cover_audit, CoverSpec};
use polynet::rational::{format_rational, parse_rational};
use polynet::regression::{oracle_inequality_report, rate_sweep, scheduled_components, SweepOptions};
use polynet::smooth::{SmoothFunction, TestFunction};
use polynet::stats::loglog_slope;
use polynet::taylor::{approximation_sweep, build_sigma_network, parameter_radius, read_derivative_table, sigma_network};
use polynet::{Activation, NetworkFile, Parallelism, Polynomial};

use crate::report::{emit, json_text, Cell, Format, Report};
use crate::{
    ActivationCommand, ActivationName, BoundArgs, Cli, Command, ConvertCommand, CoverArgs, EntropyCommand,
    FunctionArgs, RegressCommand, RepresentArgs, TaylorCommand,
};

/// 2 for bad input, 3 when a construction broke an invariant it must keep.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let consistency = err
        .chain()
        .any(|e| e.downcast_ref::<polynet::Error>().is_some_and(polynet::Error::is_consistency));
    if consistency {
        3
    } else {
        2
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.threads == 0 {
        bail!("--threads must be at least 1");
    }
    let mode = if cli.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("cannot start worker threads")?;
        Parallelism::Rayon
    } else {
        Parallelism::Sequential
    };
    let ctx = Runner { cli, mode };
    match &cli.command {
        Command::Represent(args) => ctx.represent(args),
        Command::Convert(ConvertCommand::ReluToRho { net }) => ctx.relu_to_rho(net),
        Command::Bound(args) => ctx.bound(args),
        Command::Activations(cmd) => ctx.activations(cmd),
        Command::Taylor(cmd) => ctx.taylor(cmd),
        Command::Entropy(cmd) => ctx.entropy(cmd),
        Command::Regress(cmd) => ctx.regress(cmd),
    }
}

struct Runner<'a> {
    cli: &'a Cli,
    mode: Parallelism,
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))
}

fn test_function(f: &FunctionArgs) -> Result<TestFunction> {
    Ok(TestFunction::by_name(&f.func, f.beta)?)
}

fn kv(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn big_cell(x: &impl ToString) -> Cell {
    let s = x.to_string();
    s.parse::<i64>().map(Cell::Int).unwrap_or(Cell::Text(s))
}

impl Runner<'_> {
    fn config(&self, extra: &[(&str, String)]) -> Vec<(String, String)> {
        let mut cfg = kv(&[("seed", self.cli.seed.to_string()), ("threads", self.cli.threads.to_string())]);
        cfg.extend(kv(extra));
        cfg
    }

    fn format_or(&self, default: Format) -> Format {
        self.cli.format.unwrap_or(default)
    }

    fn write_report(&self, report: &Report, default: Format) -> Result<()> {
        emit(&report.render(self.format_or(default))?, self.cli.out.as_deref())
    }

    /// Network documents are JSON with the config and a report alongside
    /// the network fields, so they stay loadable as network files.
    fn write_network(&self, net: Value, command: &str, config: Vec<(String, String)>, extra: Map<String, Value>) -> Result<()> {
        if self.format_or(Format::Json) != Format::Json {
            bail!("{command} writes networks as JSON only");
        }
        let Value::Object(mut doc) = net else {
            unreachable!("networks serialize to objects")
        };
        let mut echo = Report::new(command, config).to_json();
        doc.insert("config".into(), echo["config"].take());
        doc.insert("report".into(), Value::Object(extra));
        emit(&json_text(&Value::Object(doc)), self.cli.out.as_deref())
    }

    fn represent(&self, args: &RepresentArgs) -> Result<()> {
        let poly = Polynomial::from_json(&read_json(&args.poly)?)?;
        let config = self.config(&[
            ("poly", args.poly.display().to_string()),
            ("verify", args.verify.to_string()),
            ("trials", args.trials.to_string()),
            ("float", args.float.to_string()),
        ]);
        let compiled = compile_polynomial(&poly, self.mode)?;
        let net = compiled.network;
        let bound = width_bound(poly.degree(), poly.dim());
        let mut extra = Map::new();
        extra.insert("dim".into(), json!(poly.dim()));
        extra.insert("degree".into(), json!(poly.degree()));
        extra.insert("width".into(), json!(net.width()));
        extra.insert("width_bound".into(), Value::String(bound.bound.to_string()));
        extra.insert("exact_count".into(), Value::String(bound.exact_count.to_string()));
        let mut failed = None;
        if args.verify {
            let rep = verify_exact_representation_with(&poly, &net, args.trials, self.cli.seed, self.mode)?;
            let symbolic = match &rep.symbolic {
                SymbolicVerdict::Exact => "exact".to_string(),
                SymbolicVerdict::Mismatch(m) => format!("mismatch at {m}"),
                SymbolicVerdict::Skipped(why) => format!("skipped: {why}"),
            };
            eprintln!("verdict: {}", rep.verdict());
            extra.insert(
                "verification".into(),
                json!({
                    "verdict": rep.verdict(),
                    "points_checked": rep.points_checked,
                    "max_discrepancy": format_rational(&rep.max_discrepancy),
                    "symbolic": symbolic,
                }),
            );
            if !rep.is_exact() {
                failed = Some(polynet::Error::Consistency(format!(
                    "network differs from the polynomial by {}",
                    format_rational(&rep.max_discrepancy)
                )));
            }
        }
        let doc = if args.float { net.to_f64().to_json() } else { net.to_json() };
        self.write_network(doc, "represent", config, extra)?;
        match failed {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }

    fn relu_to_rho(&self, path: &Path) -> Result<()> {
        let config = self.config(&[("net", path.display().to_string())]);
        let converted = match NetworkFile::from_json(&read_json(path)?)? {
            NetworkFile::Exact(n) => NetworkFile::Exact(relu_to_rho(&n)?),
            NetworkFile::Float(n) => NetworkFile::Float(relu_to_rho(&n)?),
        };
        self.write_network(converted.to_json(), "convert relu-to-rho", config, Map::new())
    }

    fn bound(&self, args: &BoundArgs) -> Result<()> {
        if args.d == 0 {
            bail!("--d must be at least 1");
        }
        let b = width_bound(args.r, args.d);
        let mut report = Report::new("bound", self.config(&[("R", args.r.to_string()), ("d", args.d.to_string())]));
        report.summarize("bound", big_cell(&b.bound));
        report.summarize("exact_count", big_cell(&b.exact_count));
        self.write_report(&report, Format::Json)
    }

    fn activations(&self, cmd: &ActivationCommand) -> Result<()> {
        match cmd {
            ActivationCommand::Eval { func, x, exact } => {
                let act = activation(*func);
                let config = self.config(&[("fn", act.name().into()), ("x", x.clone()), ("exact", exact.to_string())]);
                let mut report = Report::new("activations eval", config);
                if *exact {
                    let q = parse_rational(x)?;
                    report.summarize("value", format_rational(&act.apply_exact(&q)));
                } else {
                    let x: f64 = x.parse().map_err(|_| anyhow!("--x {x:?} is not a number"))?;
                    report.summarize("value", eval_activation(*func, x)?);
                }
                self.write_report(&report, Format::Json)
            }
            ActivationCommand::Table { func, from, to, step } => {
                if !(step.is_finite() && *step > 0.0 && from.is_finite() && to.is_finite() && to >= from) {
                    bail!("need finite --from <= --to and --step > 0");
                }
                let count = ((to - from) / step + 1e-9).floor() as usize + 1;
                if count > 10_000_000 {
                    bail!("table would have {count} rows; use a larger --step");
                }
                let config = self.config(&[
                    ("fn", activation(*func).name().into()),
                    ("from", from.to_string()),
                    ("to", to.to_string()),
                    ("step", step.to_string()),
                ]);
                let mut report = Report::new("activations table", config);
                report.columns = vec!["x".into(), "value".into()];
                let mut points = Vec::with_capacity(count);
                for i in 0..count {
                    let x = from + i as f64 * step;
                    let y = eval_activation(*func, x)?;
                    report.rows.push(vec![x.into(), y.into()]);
                    points.push((x, y));
                }
                report.plot = Some(("x".into(), "value".into(), points));
                self.write_report(&report, Format::Csv)
            }
        }
    }

    fn taylor(&self, cmd: &TaylorCommand) -> Result<()> {
        match cmd {
            TaylorCommand::Build { function, m, table } => {
                if *m == 0 {
                    bail!("--M must be at least 1");
                }
                let mut config = vec![("beta", function.beta.to_string()), ("M", m.to_string())];
                let (net, k) = match table {
                    Some(path) => {
                        config.push(("table", path.display().to_string()));
                        let taylor = read_derivative_table(path, *m, function.beta)?;
                        // the table's Taylor coefficients are the tightest K it certifies
                        let k = taylor.coefficients().iter().flatten().fold(0.0, |a: f64, c| a.max(c.abs()));
                        (sigma_network(&taylor), k)
                    }
                    None => {
                        config.push(("fn", function.func.clone()));
                        let f = test_function(function)?;
                        (build_sigma_network(&f, *m)?, f.holder_radius())
                    }
                };
                let radius = parameter_radius(k, function.beta, *m);
                let mut extra = Map::new();
                extra.insert("width".into(), json!(net.width()));
                extra.insert("K".into(), json!(k));
                extra.insert("parameter_radius".into(), json!(radius));
                extra.insert("max_abs_parameter".into(), json!(net.max_abs_parameter()));
                self.write_network(net.to_json(), "taylor build", self.config(&config), extra)
            }
            TaylorCommand::Error { function, m_list, grid, csv } => {
                if m_list.contains(&0) || *grid < 2 {
                    bail!("every M must be positive and --grid at least 2");
                }
                let f = test_function(function)?;
                let config = self.config(&[
                    ("fn", function.func.clone()),
                    ("beta", function.beta.to_string()),
                    ("M-list", list(m_list)),
                    ("grid", grid.to_string()),
                ]);
                let rows = approximation_sweep(&f, m_list, *grid, self.mode)?;
                let mut report = Report::new("taylor error", config);
                report.columns = ["M", "sup_error", "bound", "within_bound"].map(String::from).to_vec();
                for r in &rows {
                    report.rows.push(vec![r.m.into(), r.sup_error.into(), r.bound.into(), (r.sup_error <= r.bound).into()]);
                }
                report.summarize("K", f.holder_radius());
                let fitted: Vec<_> = rows.iter().filter(|r| r.sup_error > 0.0).collect();
                if fitted.len() >= 2 {
                    let ms: Vec<f64> = fitted.iter().map(|r| r.m as f64).collect();
                    let es: Vec<f64> = fitted.iter().map(|r| r.sup_error).collect();
                    report.summarize("loglog_slope", loglog_slope(&ms, &es));
                }
                report.plot = Some((
                    "log_M".into(),
                    "log_sup_error".into(),
                    fitted.iter().map(|r| ((r.m as f64).ln(), r.sup_error.ln())).collect(),
                ));
                if let Some(path) = csv {
                    emit(&report.render(Format::Csv)?, Some(path))?;
                }
                self.write_report(&report, Format::Json)
            }
        }
    }

    fn cover_spec(&self, c: &CoverArgs) -> Result<(CoverSpec, Vec<(&'static str, String)>)> {
        let spec = CoverSpec::new(c.p, c.r, c.delta)?;
        Ok((spec, vec![("P", c.p.to_string()), ("R", c.r.to_string()), ("delta", c.delta.to_string())]))
    }

    fn entropy(&self, cmd: &EntropyCommand) -> Result<()> {
        match cmd {
            EntropyCommand::Bound { cover } => {
                let (spec, config) = self.cover_spec(cover)?;
                let mut report = Report::new("entropy bound", self.config(&config));
                report.summarize("epsilon", spec.epsilon());
                report.summarize("grid_max_index", spec.grid_max_index());
                report.summarize("log2_cover_size", spec.log2_cover_size());
                report.summarize("entropy_bound", spec.entropy_bound());
                report.summarize("within_bound", spec.log2_cover_size() <= spec.entropy_bound());
                self.write_report(&report, Format::Json)
            }
            EntropyCommand::Audit { cover, samples, grid, csv } => {
                if *samples == 0 || *grid < 2 {
                    bail!("--samples must be positive and --grid at least 2");
                }
                let (spec, mut config) = self.cover_spec(cover)?;
                config.push(("samples", samples.to_string()));
                config.push(("grid", grid.to_string()));
                let records = cover_audit(&spec, *samples, self.cli.seed, *grid, self.mode);
                let mut report = Report::new("entropy audit", self.config(&config));
                report.columns = ["sample", "grid_distance", "certified_distance", "delta", "pass"]
                    .map(String::from)
                    .to_vec();
                for r in &records {
                    report.rows.push(vec![
                        r.sample.into(),
                        r.grid_distance.into(),
                        r.certified_distance.into(),
                        r.delta.into(),
                        r.passes().into(),
                    ]);
                }
                report.summarize("passed", records.iter().filter(|r| r.passes()).count());
                report.summarize(
                    "max_certified_distance",
                    records.iter().map(|r| r.certified_distance).fold(0.0, f64::max),
                );
                if let Some(path) = csv {
                    emit(&report.render(Format::Csv)?, Some(path))?;
                }
                self.write_report(&report, Format::Json)
            }
        }
    }

    fn regress(&self, cmd: &RegressCommand) -> Result<()> {
        let RegressCommand::Sweep { function, k, n_list, reps, mc_points, noise, csv, plot_data } = cmd;
        if *mc_points == 0 || !(noise.is_finite() && *noise >= 0.0) {
            bail!("--mc-points must be positive and --noise non-negative");
        }
        let f = test_function(function)?;
        let k = k.unwrap_or_else(|| f.holder_radius());
        let config = self.config(&[
            ("fn", function.func.clone()),
            ("beta", function.beta.to_string()),
            ("K", k.to_string()),
            ("n", list(n_list)),
            ("reps", reps.to_string()),
            ("mc_points", mc_points.to_string()),
            ("noise", noise.to_string()),
        ]);
        let opts = SweepOptions { k, noise_scale: *noise, mc_points: *mc_points };
        let sweep = rate_sweep(&f, n_list, *reps, self.cli.seed, &opts, self.mode)?;

        let mut report = Report::new("regress sweep", config);
        report.columns = ["n", "rep", "error", "stderr", "seed", "residual_rms", "clipped", "kkt_violation"]
            .map(String::from)
            .to_vec();
        for r in &sweep.records {
            report.rows.push(vec![
                r.n.into(),
                r.rep.into(),
                r.error.into(),
                r.stderr.into(),
                r.seed.into(),
                r.residual_rms.into(),
                r.clipped.into(),
                r.kkt_violation.into(),
            ]);
        }
        report.summarize("theoretical_exponent", sweep.theoretical);
        report.summarize("slope_raw", sweep.slope_raw);
        report.summarize("slope_log_adjusted", sweep.slope_log_adjusted);
        report.summarize("worst_kkt_violation", sweep.worst_kkt_violation());
        report.summarize("monotonicity_breaks", sweep.monotonicity_breaks().len());
        for level in &sweep.levels {
            let oracle = oracle_inequality_report(scheduled_components(f.beta(), k, level.n)?)?;
            let errors: Vec<f64> = sweep.records.iter().filter(|r| r.n == level.n).map(|r| r.error).collect();
            let covered = errors.iter().filter(|&&e| e <= oracle.rhs).count() as f64 / errors.len() as f64;
            let n = level.n;
            report.summarize(&format!("n{n}_M"), level.m);
            report.summarize(&format!("n{n}_median"), level.median);
            report.summarize(&format!("n{n}_median_stderr"), level.median_stderr);
            report.summarize(&format!("n{n}_oracle_rhs"), oracle.rhs);
            report.summarize(&format!("n{n}_oracle_coverage"), covered);
        }
        report.plot = Some((
            "log_n".into(),
            "log_median_error".into(),
            sweep.levels.iter().map(|l| ((l.n as f64).ln(), l.median.ln())).collect(),
        ));
        if let Some(path) = csv {
            emit(&report.render(Format::Csv)?, Some(path))?;
        }
        if let Some(path) = plot_data {
            emit(&report.render(Format::PlotData)?, Some(path))?;
        }
        self.write_report(&report, Format::Json)
    }
}

fn activation(name: ActivationName) -> Activation {
    match name {
        ActivationName::Rho => Activation::Rho,
        ActivationName::Sigma => Activation::Sigma,
        ActivationName::Relu => Activation::Relu,
    }
}

fn eval_activation(name: ActivationName, x: f64) -> Result<f64> {
    if !x.is_finite() {
        bail!("activation argument must be finite, got {x}");
    }
    Ok(match name {
        ActivationName::Rho => rho_checked(x)?,
        ActivationName::Sigma => sigma(x),
        ActivationName::Relu => relu(x),
    })
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use baskakov::moments::{audit_grid, summarize, AuditConfig, AuditGrid, MomentReport};
use baskakov::operator::{apply, apply_with_deviation};
use baskakov::theorems::{
    bound_thm31, bound_thm32, bound_thm41, default_window, voronovskaya_target,
};
use baskakov::{FunctionSpec, OperatorParams, StepWeightExponent, Window};
use serde::Serialize;

use crate::config::{
    self, AuditRunConfig, Config, ConvergeConfig, DirectConfig, EvalConfig, ParamsConfig,
    PlotConfig, PolicyConfig, WindowConfig,
};
use crate::dsl::parse_function;
use crate::format::{config_header, fmt_f64, to_json_pretty, to_value};
use crate::{AuditArgs, CliError, ConvergeArgs, DirectArgs, EvalArgs, PlotArgs, PolicyArgs};

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("missing required flag --{flag}")))
}

fn policy_config(p: &PolicyArgs) -> PolicyConfig {
    PolicyConfig {
        mass_eps: p.mass_eps,
        term_eps: p.term_eps,
        consecutive_small: p.consecutive_small,
        k_max: p.k_max,
    }
}

fn parse_list<T: FromStr>(text: &str, flag: &str) -> Result<Vec<T>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|tok| {
            let t = tok.trim();
            t.parse::<T>()
                .map_err(|_| usage(format!("invalid value '{t}' in --{flag}")))
        })
        .collect()
}

fn check_ladder(ladder: &[u64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(usage("--n-ladder is empty"));
    }
    if ladder[0] == 0 || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage("--n-ladder must be positive and strictly increasing"));
    }
    Ok(())
}

fn load_config(path: &Path, expected: &str) -> Result<Config> {
    let c = config::load(path)?;
    if c.command() != expected {
        return Err(usage(format!(
            "{} holds a '{}' configuration, not '{expected}'",
            path.display(),
            c.command()
        )));
    }
    Ok(c)
}

fn write_output(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn function(text: &str) -> Result<FunctionSpec> {
    parse_function(text).map_err(CliError::Usage)
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => match load_config(path, "eval")? {
            Config::Eval(c) => c,
            _ => unreachable!("checked by load_config"),
        },
        None => EvalConfig {
            params: ParamsConfig {
                n: required(args.n, "n")?,
                a: args.shift.a,
                alpha: args.shift.alpha,
                beta: args.shift.beta,
            },
            x: required(args.x, "x")?,
            function: required(args.function.clone(), "fn")?,
            policy: policy_config(&args.policy),
        },
    };
    let params = cfg.params.params()?;
    let f = function(&cfg.function)?;
    let r = apply(&params, &f, cfg.x, &cfg.policy.policy()?)?;
    println!(
        "value={} terms_used={} mass_covered={}",
        fmt_f64(r.value),
        r.terms_used,
        fmt_f64(r.mass_covered)
    );
    Ok(())
}

fn audit_config(args: &AuditArgs) -> Result<AuditRunConfig> {
    let preset = match args.grid.as_str() {
        "standard" => AuditGrid::standard(),
        "smoke" => AuditGrid::smoke(),
        other => return Err(usage(format!("unknown grid preset '{other}'; expected standard or smoke"))),
    };
    let shifts: Vec<[f64; 2]> = match (&args.alpha, &args.beta) {
        (None, None) => preset.shifts.iter().map(|&(a, b)| [a, b]).collect(),
        (Some(al), Some(be)) => {
            let al: Vec<f64> = parse_list(al, "alpha")?;
            let be: Vec<f64> = parse_list(be, "beta")?;
            if al.len() != be.len() {
                return Err(usage("--alpha and --beta must list the same number of values"));
            }
            al.into_iter().zip(be).map(|(a, b)| [a, b]).collect()
        }
        _ => return Err(usage("--alpha and --beta must be given together")),
    };
    let n_ladder: Vec<u64> = parse_list(&args.n_ladder, "n-ladder")?;
    check_ladder(&n_ladder)?;
    if n_ladder.len() < 2 {
        return Err(usage("--n-ladder needs at least two values for extrapolation"));
    }
    Ok(AuditRunConfig {
        grid: args.grid.clone(),
        n: match &args.n {
            Some(t) => parse_list(t, "n")?,
            None => preset.ns.clone(),
        },
        a: match &args.a {
            Some(t) => parse_list(t, "a")?,
            None => preset.a_values.clone(),
        },
        shifts,
        x: match &args.x {
            Some(t) => parse_list(t, "x")?,
            None => preset.xs.clone(),
        },
        tolerance: args.tolerance,
        limit_tolerance: args.limit_tolerance,
        n_ladder,
        policy: policy_config(&args.policy),
    })
}

#[derive(Serialize)]
struct AuditDocument<'a> {
    config: &'a Config,
    summary: Vec<baskakov::moments::LemmaSummary>,
    reports: &'a [MomentReport],
}

const AUDIT_COLUMNS: &str =
    "lemma_id,n,a,alpha,beta,x,printed_value,oracle_value,derived_value,abs_diff,rel_diff,verdict";

fn audit_csv(config: &Config, reports: &[MomentReport]) -> String {
    let mut s = config_header(config);
    s.push_str(AUDIT_COLUMNS);
    s.push('\n');
    for r in reports {
        let verdict = to_value(&r.verdict);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.lemma_id,
            r.params.n(),
            fmt_f64(r.params.a()),
            fmt_f64(r.params.alpha()),
            fmt_f64(r.params.beta()),
            fmt_f64(r.x),
            fmt_f64(r.printed_value),
            fmt_f64(r.oracle_value),
            fmt_f64(r.derived_value.unwrap_or(f64::NAN)),
            fmt_f64(r.abs_diff),
            fmt_f64(r.rel_diff),
            verdict.as_str().expect("unit variant"),
        );
    }
    s
}

pub fn audit(args: AuditArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => match load_config(path, "audit")? {
            Config::Audit(c) => c,
            _ => unreachable!("checked by load_config"),
        },
        None => audit_config(&args)?,
    };
    let grid = cfg.grid();
    let audit_cfg: AuditConfig = cfg.audit();
    let policy = cfg.policy.policy()?;
    let reports = audit_grid(&grid, &policy, &audit_cfg)?;
    let summary = summarize(&reports);
    let config = Config::Audit(cfg);
    let out = args.out.as_deref();
    let is_csv = out
        .and_then(|p| p.extension())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let contents = if is_csv {
        audit_csv(&config, &reports)
    } else {
        to_json_pretty(&AuditDocument {
            config: &config,
            summary: summary.clone(),
            reports: &reports,
        })
    };
    write_output(out, &contents)?;
    if out.is_some() {
        for s in &summary {
            println!(
                "{:<18} {:>4}/{:<4} match{}",
                s.lemma_id.as_str(),
                s.matches,
                s.points,
                if s.known_discrepant { "  (known typesetting defect)" } else { "" }
            );
        }
    }
    let unexpected: Vec<&str> = summary
        .iter()
        .filter(|s| s.unexpected())
        .map(|s| s.lemma_id.as_str())
        .collect();
    if unexpected.is_empty() {
        Ok(())
    } else {
        Err(CliError::Discrepancy(format!(
            "unexpected discrepancies in {}",
            unexpected.join(", ")
        )))
    }
}

fn window_for(cfg: &WindowConfig, params: &OperatorParams, x: f64) -> Result<Window> {
    let upper = match cfg.upper {
        Some(u) => u,
        None => default_window(params, x).upper(),
    };
    Window::new(upper, cfg.grid_points).map_err(CliError::from)
}

fn window_config(upper: Option<f64>, grid_points: usize) -> Result<WindowConfig> {
    let cfg = WindowConfig { upper, grid_points };
    // validate eagerly so bad flags fail before any work
    Window::new(upper.unwrap_or(1.0), grid_points)?;
    Ok(cfg)
}

const CONVERGE_COLUMNS: &str =
    "n,Lf,f,abs_error,n_times_error,voronovskaya_target,bound_thm31,bound_thm32";

pub fn converge(args: ConvergeArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => match load_config(path, "converge")? {
            Config::Converge(c) => c,
            _ => unreachable!("checked by load_config"),
        },
        None => ConvergeConfig {
            a: args.shift.a,
            alpha: args.shift.alpha,
            beta: args.shift.beta,
            x: required(args.x, "x")?,
            function: required(args.function.clone(), "fn")?,
            n_ladder: parse_list(&args.n_ladder, "n-ladder")?,
            window: window_config(args.window, args.grid_points)?,
            policy: policy_config(&args.policy),
        },
    };
    check_ladder(&cfg.n_ladder)?;
    let f = function(&cfg.function)?;
    let policy = cfg.policy.policy()?;
    let x = cfg.x;
    let target = match (f.d1(x), f.d2(x)) {
        (Some(d1), Some(d2)) => voronovskaya_target(cfg.a, cfg.alpha, cfg.beta, d1, d2, x),
        _ => f64::NAN,
    };
    let mut body = String::new();
    for &n in &cfg.n_ladder {
        let p = OperatorParams::new(n, cfg.a, cfg.alpha, cfg.beta)?;
        let (full, dev) = apply_with_deviation(&p, &f, x, &policy)?;
        let window = window_for(&cfg.window, &p, x)?;
        let thm31 = bound_thm31(&p, &f, x, &window, &policy)?.rhs;
        let thm32 = if f.has_d1() {
            bound_thm32(&p, &f, x, &window, &policy)?.rhs
        } else {
            f64::NAN
        };
        let _ = writeln!(
            body,
            "{n},{},{},{},{},{},{},{}",
            fmt_f64(full.value),
            fmt_f64(f.eval(x)),
            fmt_f64(dev.value.abs()),
            fmt_f64(n as f64 * dev.value),
            fmt_f64(target),
            fmt_f64(thm31),
            fmt_f64(thm32),
        );
    }
    let config = Config::Converge(cfg);
    let contents = format!("{}{CONVERGE_COLUMNS}\n{body}", config_header(&config));
    write_output(args.out.as_deref(), &contents)
}

pub fn direct(args: DirectArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => match load_config(path, "direct")? {
            Config::Direct(c) => c,
            _ => unreachable!("checked by load_config"),
        },
        None => DirectConfig {
            a: args.shift.a,
            alpha: args.shift.alpha,
            beta: args.shift.beta,
            x: required(args.x, "x")?,
            function: required(args.function.clone(), "fn")?,
            lambda: args.lambda,
            n_ladder: parse_list(&args.n_ladder, "n-ladder")?,
            window: window_config(args.window, args.grid_points)?,
            policy: policy_config(&args.policy),
        },
    };
    check_ladder(&cfg.n_ladder)?;
    let f = function(&cfg.function)?;
    let lambda = StepWeightExponent::new(cfg.lambda)?;
    let p = OperatorParams::new(cfg.n_ladder[0], cfg.a, cfg.alpha, cfg.beta)?;
    let window = window_for(&cfg.window, &p, cfg.x)?;
    let points = bound_thm41(&p, &f, cfg.x, lambda, Some(&window), &cfg.n_ladder, &cfg.policy.policy()?)?;
    let config = Config::Direct(cfg);
    let mut s = config_header(&config);
    s.push_str("n,lhs,modulus,ratio,degenerate\n");
    for pt in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            pt.n,
            fmt_f64(pt.lhs),
            fmt_f64(pt.modulus),
            fmt_f64(pt.ratio),
            pt.degenerate
        );
    }
    write_output(args.out.as_deref(), &s)
}

fn series_path(prefix: &Path, series: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(format!("_{series}.dat"));
    PathBuf::from(name)
}

pub fn plotdata(args: PlotArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => match load_config(path, "plotdata")? {
            Config::Plotdata(c) => c,
            _ => unreachable!("checked by load_config"),
        },
        None => PlotConfig {
            input: required(args.input.as_ref(), "input")?.display().to_string(),
            series: parse_list(required(args.series.as_deref(), "series")?, "series")?,
            x_column: args.x_column.clone(),
        },
    };
    if cfg.series.is_empty() {
        return Err(usage("--series is empty"));
    }
    let text = fs::read_to_string(&cfg.input)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", cfg.input)))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| usage(format!("{}: {e}", cfg.input)))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| usage(format!("{}: {e}", cfg.input)))?;
    if headers.iter().all(|h| h.is_empty()) || rows.is_empty() {
        return Err(usage(format!("{} has no data rows", cfg.input)));
    }
    let column = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            usage(format!(
                "no column '{name}' in {}; available: {}",
                cfg.input,
                headers.join(", ")
            ))
        })
    };
    let x_index = match &cfg.x_column {
        Some(name) => column(name)?,
        None => 0,
    };
    let indices = cfg
        .series
        .iter()
        .map(|s| column(s))
        .collect::<Result<Vec<_>>>()?;
    let header = config_header(&Config::Plotdata(cfg.clone()));
    for (series, &index) in cfg.series.iter().zip(&indices) {
        let mut s = header.clone();
        for row in &rows {
            let _ = writeln!(s, "{} {}", &row[x_index], &row[index]);
        }
        write_output(Some(&series_path(&args.out, series)), &s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list::<u64>("1, 2,3", "n").unwrap(), vec![1, 2, 3]);
        assert!(parse_list::<u64>("", "n").unwrap().is_empty());
        let e = parse_list::<f64>("1,q", "x").unwrap_err();
        assert!(matches!(e, CliError::Usage(ref m) if m.contains("'q'")));
    }

    #[test]
    fn ladders() {
        assert!(check_ladder(&[10]).is_ok());
        assert!(check_ladder(&[]).is_err());
        assert!(check_ladder(&[0, 2]).is_err());
        assert!(check_ladder(&[4, 4]).is_err());
    }

    #[test]
    fn series_files() {
        assert_eq!(series_path(Path::new("out/run"), "Lf"), PathBuf::from("out/run_Lf.dat"));
    }
}

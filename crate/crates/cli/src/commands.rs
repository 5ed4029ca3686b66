use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lmm_core::arith::{EpsSeries, Rational, Var};
use lmm_core::engine::{
    direct_oracle, eps_layer_lengths, eps_layered_propagate, plan_pipeline, run_pipeline,
    truncate_run, verify_window, LayeredMoments, LayeredStream, PipelinePlan,
};
use lmm_core::epsolve::{eps_layer_solve, ClosedForm, LayerRhs, SolutionExpr};
use lmm_core::expr::parse_expr;
use lmm_core::formats::{
    moment_file_name, parse_initial_values, read_text, write_text, MomentFile, RecurrenceFile,
};
use lmm_core::guess::{guess_recurrence, GuessConfig};
use lmm_core::ode2rec::{normalize_stage, ode_to_recurrence_univariate, EpsRecurrence};
use lmm_core::system::{read_system, CoupledSystem, EpsWindow, InitialValues};
use lmm_core::uncouple::gauss_uncouple;
use lmm_core::{Error, Result};

use crate::{Failure, RunArgs};

type CmdResult = std::result::Result<(), Failure>;

fn parse_window(s: &str) -> Result<EpsWindow> {
    let bad = || Error::InvalidArgument(format!("window '{s}' is not of the form l:r"));
    let (l, r) = s.split_once(':').ok_or_else(bad)?;
    let l: i64 = l.trim().parse().map_err(|_| bad())?;
    let r: i64 = r.trim().parse().map_err(|_| bad())?;
    EpsWindow::new(l, r)
}

fn windows_for(specs: &[String], size: usize) -> Result<Vec<EpsWindow>> {
    let ws = specs
        .iter()
        .map(|s| parse_window(s))
        .collect::<Result<Vec<_>>>()?;
    match ws.len() {
        0 => Ok(vec![EpsWindow::new(0, 0)?; size]),
        1 => Ok(vec![ws[0]; size]),
        n if n == size => Ok(ws),
        n => Err(Error::InvalidArgument(format!(
            "{n} windows given for {size} components"
        ))),
    }
}

fn read_init(path: Option<&Path>) -> Result<InitialValues> {
    match path {
        None => Ok(InitialValues::default()),
        Some(p) => parse_initial_values(&read_text(p)?, &p.display().to_string()),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn out_dir(out: Option<&Path>) -> Result<PathBuf> {
    let dir = out.map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    ensure_dir(&dir)?;
    Ok(dir)
}

fn write_moments(dir: &Path, m: &LayeredMoments, hash: &str) -> Result<()> {
    for k in m.window.orders() {
        let mf = MomentFile {
            component: Some(m.component + 1),
            eps_order: Some(k),
            hash: Some(hash.to_string()),
            values: m.layer(k).expect("window order").to_vec(),
        };
        mf.write(&dir.join(moment_file_name(m.component, k)))?;
    }
    Ok(())
}

/// Fold checkpointed moment files into the initial values. Files must carry
/// the hash of the stage recurrence; the engine checks every surplus value.
fn absorb_checkpoints(dir: &Path, plan: &PipelinePlan, init: &mut InitialValues) -> Result<usize> {
    let mut used = 0;
    for stage in &plan.stages {
        let j = stage.component;
        let expected = stage.recurrence_hash();
        for k in plan.requested[j].orders() {
            let path = dir.join(moment_file_name(j, k));
            if !path.exists() {
                continue;
            }
            let mf = MomentFile::read(&path)?;
            let found = mf.hash.clone().unwrap_or_default();
            if found != expected {
                return Err(Error::HashMismatch { expected, found });
            }
            if mf.values.len() > init.get(j, k).len() {
                init.set(j, k, mf.values);
                used += 1;
            }
        }
    }
    Ok(used)
}

fn oracle_compare(
    sys: &CoupledSystem,
    plan: &PipelinePlan,
    init: &InitialValues,
    got: &[LayeredMoments],
) -> Result<()> {
    let windows: Vec<EpsWindow> = (0..sys.size()).map(|j| plan.stage_of(j).window).collect();
    let series: Vec<EpsSeries> = windows
        .iter()
        .enumerate()
        .map(|(j, w)| {
            let coeffs = w
                .orders()
                .map(|k| init.get(j, k).first().cloned().unwrap_or(Rational::ZERO))
                .collect();
            EpsSeries::new(w.low, coeffs)
        })
        .collect();
    let oracle = direct_oracle(sys, &series, &windows, plan.mu)?;
    for m in got {
        for k in m.window.orders() {
            if m.layer(k) != oracle[m.component].layer(k) {
                return Err(Error::OracleMismatch(format!(
                    "f{}, eps-order {k} differs from the direct oracle",
                    m.component + 1
                )));
            }
        }
    }
    Ok(())
}

fn manifest(sys: &CoupledSystem, plan: &PipelinePlan, checks: &[&str]) -> String {
    let mut s = String::new();
    writeln!(s, "system {}", sys.name).unwrap();
    writeln!(s, "mu {}", plan.mu).unwrap();
    for st in &plan.stages {
        let r = &st.normalized.record;
        writeln!(s, "stage f{}", st.component + 1).unwrap();
        writeln!(s, "  ode-order {}", st.normalized.order).unwrap();
        writeln!(s, "  requested-window {}:{}", plan.requested[st.component].low, plan.requested[st.component].high).unwrap();
        writeln!(s, "  computed-window {}:{}", st.window.low, st.window.high).unwrap();
        writeln!(s, "  normalization u={} k={} p={}", r.u, r.k, r.p).unwrap();
        writeln!(s, "  recurrence-order {}", st.meta.d).unwrap();
        writeln!(s, "  unnormalized-order {}", st.unnormalized_order).unwrap();
        writeln!(s, "  order-bound {}", st.bound).unwrap();
        writeln!(s, "  d-prime {} delta {}", st.meta.d_prime, st.meta.delta).unwrap();
        writeln!(s, "  required-initial {}", st.meta.required_initial_count).unwrap();
        let counts: Vec<String> = st
            .window
            .orders()
            .zip(&st.init_counts)
            .map(|(k, c)| format!("{k}:{c}"))
            .collect();
        writeln!(s, "  initial-counts {}", counts.join(" ")).unwrap();
        writeln!(s, "  recurrence-hash {}", st.recurrence_hash()).unwrap();
    }
    for c in checks {
        writeln!(s, "{c}").unwrap();
    }
    s
}

pub fn pipeline(args: &RunArgs, verify: bool, oracle: bool, resume: bool) -> CmdResult {
    let sys = read_system(&args.system)?;
    for w in sys.warnings() {
        eprintln!("warning: {w}");
    }
    let windows = windows_for(&args.windows, sys.size())?;
    let mut init = read_init(args.init.as_deref())?;
    let dir = out_dir(args.out.as_deref())?;
    let plan = plan_pipeline(&sys, &windows, args.mu)?;
    if resume {
        let n = absorb_checkpoints(&dir, &plan, &mut init)?;
        eprintln!("resumed from {n} checkpoint file(s)");
    }
    let moments = if verify {
        verify_window(&sys, &init, &windows, args.mu)?
    } else {
        truncate_run(&run_pipeline(&sys, &plan, &init)?, &windows, args.mu)
    };
    let mut checks = Vec::new();
    if verify {
        checks.push("verify-window: match");
    }
    if oracle {
        oracle_compare(&sys, &plan, &init, &moments)?;
        checks.push("oracle: match");
    }
    for m in &moments {
        write_moments(&dir, m, &plan.stage_of(m.component).recurrence_hash())?;
    }
    let text = manifest(&sys, &plan, &checks);
    write_text(&dir.join("manifest.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn oracle_check(args: &RunArgs) -> CmdResult {
    let sys = read_system(&args.system)?;
    let windows = windows_for(&args.windows, sys.size())?;
    let init = read_init(args.init.as_deref())?;
    let plan = plan_pipeline(&sys, &windows, args.mu)?;
    let got = truncate_run(&run_pipeline(&sys, &plan, &init)?, &windows, args.mu);
    oracle_compare(&sys, &plan, &init, &got)?;
    println!("oracle: match");
    Ok(())
}

pub fn uncouple(system: &Path, out: Option<&Path>) -> CmdResult {
    let sys = read_system(system)?;
    let unc = gauss_uncouple(&sys)?;
    let dir = out.map(|d| out_dir(Some(d))).transpose()?;
    for stage in &unc.stages {
        let j = stage.component + 1;
        println!("stage f{j} (order {}): {stage}", stage.order());
        let norm = normalize_stage(stage)?;
        let r = &norm.record;
        println!("  normalization u={} k={} p={}", r.u, r.k, r.p);
        let (rec, shift) = ode_to_recurrence_univariate(&norm.lhs)?;
        let meta = rec.meta();
        println!(
            "  recurrence (shift {shift}, order {}, required initial {}): {rec}",
            meta.d, meta.required_initial_count
        );
        if let Some(d) = &dir {
            write_text(&d.join(format!("f{j}.rec")), &rec.to_file().to_text())?;
        }
    }
    Ok(())
}

pub fn guess(moments: &Path, max_order: usize, max_degree: usize, out: Option<&Path>) -> CmdResult {
    let mf = MomentFile::read(moments)?;
    let cfg = GuessConfig::new(max_order, max_degree);
    match guess_recurrence(&mf.values, &cfg)? {
        None => Err(Failure {
            class: "no-recurrence-found",
            detail: format!(
                "no recurrence of order <= {max_order} and degree <= {max_degree} fits {} moments",
                mf.values.len()
            ),
        }),
        Some(g) => {
            let text = g.recurrence.to_file().to_text();
            if let Some(d) = out {
                ensure_dir(d)?;
                write_text(&d.join("recurrence.txt"), &text)?;
            }
            print!("{text}");
            eprintln!(
                "fit {} rows, verified {} rows, {} primes",
                g.fit_rows, g.verified_rows, g.primes_used
            );
            Ok(())
        }
    }
}

/// Rhs moments per order of `window`. A `rhs:` path containing `{k}` names
/// one file per order; otherwise the single file supplies the order in its
/// `# eps-order` header (default the lowest window order).
fn rhs_layers(rf: &RecurrenceFile, base: &Path, window: EpsWindow) -> Result<Vec<Option<Vec<Rational>>>> {
    let mut out = vec![None; window.len()];
    let Some(spec) = &rf.rhs else {
        return Ok(out);
    };
    let base = base.parent().unwrap_or(Path::new("."));
    if spec.contains("{k}") {
        for (idx, k) in window.orders().enumerate() {
            let p = base.join(spec.replace("{k}", &k.to_string()));
            if p.exists() {
                out[idx] = Some(MomentFile::read(&p)?.values);
            }
        }
    } else {
        let mf = MomentFile::read(&base.join(spec))?;
        let k = mf.eps_order.unwrap_or(window.low);
        if !window.contains(k) {
            return Err(Error::InvalidArgument(format!(
                "rhs file is at eps-order {k}, outside the window {}:{}",
                window.low, window.high
            )));
        }
        out[(k - window.low) as usize] = Some(mf.values);
    }
    Ok(out)
}

fn read_recurrence(path: &Path) -> Result<(RecurrenceFile, EpsRecurrence)> {
    let rf = RecurrenceFile::read(path)?;
    let rec = EpsRecurrence::new(rf.coeffs.clone(), 0)?;
    Ok((rf, rec))
}

pub fn moments(
    recurrence: &Path,
    init: Option<&Path>,
    mu: usize,
    window: &str,
    out: Option<&Path>,
) -> CmdResult {
    let window = parse_window(window)?;
    let (rf, rec) = read_recurrence(recurrence)?;
    let init = read_init(init)?;
    let dp = rec.at_eps_zero().order();
    let lens = eps_layer_lengths(&rec, window, mu);
    let layers = rhs_layers(&rf, recurrence, window)?
        .into_iter()
        .zip(&lens)
        .map(|(l, &len)| l.unwrap_or_else(|| vec![Rational::ZERO; len.saturating_sub(dp)]))
        .collect();
    let rhs = LayeredStream::new(window.low, layers);
    let m = eps_layered_propagate(&rec, &rhs, &init, 0, window, mu)?;
    let dir = out_dir(out)?;
    write_moments(&dir, &m, &rf.hash())?;
    for k in window.orders() {
        println!("{}", dir.join(moment_file_name(0, k)).display());
    }
    Ok(())
}

pub fn solve(
    recurrence: &Path,
    init: Option<&Path>,
    mu: usize,
    window: &str,
    rhs_expr: &[String],
    out: Option<&Path>,
) -> CmdResult {
    let window = parse_window(window)?;
    let (rf, rec) = read_recurrence(recurrence)?;
    let init = read_init(init)?;
    let mut rhs: Vec<LayerRhs> = rhs_layers(&rf, recurrence, window)?
        .into_iter()
        .map(|l| match l {
            Some(v) => LayerRhs::Stream(v),
            None => LayerRhs::Closed(ClosedForm::zero()),
        })
        .collect();
    for spec in rhs_expr {
        let (k, e) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--rhs-expr '{spec}' is not k=<expr>")))?;
        let k: i64 = k
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad eps-order in --rhs-expr '{spec}'")))?;
        if !window.contains(k) {
            return Err(Error::InvalidArgument(format!("--rhs-expr order {k} is outside the window")).into());
        }
        let f = parse_expr(e)?.to_ratfunc(Var::N)?;
        rhs[(k - window.low) as usize] = LayerRhs::Closed(ClosedForm::rational(f)?);
    }
    let sol = eps_layer_solve(&rec, &rhs, &init, window, mu)?;
    let dir = out_dir(out)?;
    let mut text = sol.to_text();
    for (k, l) in window.orders().zip(&sol.layers) {
        if let SolutionExpr::MomentFallback(v) = l {
            let name = moment_file_name(0, k);
            let mf = MomentFile {
                component: Some(1),
                eps_order: Some(k),
                hash: Some(rf.hash()),
                values: v.clone(),
            };
            mf.write(&dir.join(&name))?;
            writeln!(text, "eps^{k} moments: {name}").unwrap();
        }
    }
    write_text(&dir.join("solution.txt"), &text)?;
    print!("{text}");
    Ok(())
}

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::args::{Command, ErrmodelArgs, GemmArgs, HardwareArgs, MethodArg, ModeArg, PipesimArgs, PlanArgs, SplitArgs};
use super::output::{commit, emit};
use crate::errmodel;
use crate::error::{Error, Result};
use crate::gemm::{dgemm_oracle, error_norms, generate_pair, ErrorReport, GemmMethod, SampleSpec};
use crate::matrix::Matrix;
use crate::pipesim::{self, Mode, SimOptions};
use crate::planner::{self, BlockPlan, HardwareModel};
use crate::sgcm::{self, AnyMatrix};
use crate::split;

pub fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Split(a) => cmd_split(&a, stdout),
        Command::Gemm(a) => cmd_gemm(&a, stdout),
        Command::Errmodel(a) => cmd_errmodel(&a, stdout),
        Command::Plan(a) => cmd_plan(&a, stdout, stderr),
        Command::Pipesim(a) => cmd_pipesim(&a, stdout, stderr),
    }
}

/// Parses `"a,b,lo:hi"` into the listed values, ranges inclusive.
pub fn parse_list<T>(text: &str, what: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr + Copy + PartialOrd + TryFrom<i128>,
    i128: From<T>,
{
    let bad = || Error::Domain(format!("invalid {what} list '{text}'"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        // a leading '-' belongs to the number, so split on the first ':'
        if let Some((lo, hi)) = item.split_once(':') {
            let lo: T = lo.trim().parse().map_err(|_| bad())?;
            let hi: T = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            for v in i128::from(lo)..=i128::from(hi) {
                out.push(T::try_from(v).map_err(|_| bad())?);
            }
        } else {
            out.push(item.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn sgcm_bytes(m: &AnyMatrix) -> Vec<u8> {
    let mut v = Vec::new();
    sgcm::write(&mut v, m).expect("writing to memory");
    v
}

fn cmd_split(a: &SplitArgs, stdout: &mut dyn Write) -> Result<()> {
    let m = sgcm::load(&a.input)?.into_f32()?;
    let s = split::split_matrix(&m, a.sb)?;
    let high = sgcm_bytes(&AnyMatrix::F16(s.high.clone()));
    let low = sgcm_bytes(&AnyMatrix::F16(s.low_scaled.clone()));

    let zero_residuals = s.low_scaled.as_slice().iter().filter(|h| h.is_zero()).count();
    let max_low = s.low_scaled.as_slice().iter().map(|h| h.to_f32().abs()).fold(0f32, f32::max);
    let mut report = String::from("key,value\n");
    let _ = writeln!(report, "rows,{}", m.rows());
    let _ = writeln!(report, "cols,{}", m.cols());
    let _ = writeln!(report, "sb,{}", a.sb);
    let _ = writeln!(report, "zero_residuals,{zero_residuals}");
    let _ = writeln!(report, "max_abs_low_scaled,{max_low}");
    if let Some((lo, hi)) = split::fp16_exponent_range(m.as_slice()) {
        let rec = split::recommend_sb(lo, hi)?;
        let _ = writeln!(report, "exponent_min,{lo}");
        let _ = writeln!(report, "exponent_max,{hi}");
        let _ = writeln!(report, "recommended_sb,{}", rec.sb);
        let _ = writeln!(report, "recommendation_best_effort,{}", rec.best_effort);
    }
    commit(&[(with_suffix(&a.output, ".high.sgcm"), high), (with_suffix(&a.output, ".low.sgcm"), low)])?;
    stdout.write_all(report.as_bytes())?;
    Ok(())
}

fn method_of(m: MethodArg, sb: i32) -> GemmMethod {
    match m {
        MethodArg::Hgemm => GemmMethod::Hgemm,
        MethodArg::CubeElementwise => GemmMethod::CubeElementwise { sb },
        MethodArg::CubeTermwise => GemmMethod::CubeTermwise { sb },
        MethodArg::F32Reference => GemmMethod::F32Reference,
        MethodArg::OracleF64 => GemmMethod::OracleF64,
    }
}

fn evaluate(
    a: &Matrix<f32>,
    b: &Matrix<f32>,
    methods: &[GemmMethod],
    point: Option<SampleSpec>,
) -> Result<Vec<ErrorReport>> {
    let oracle = dgemm_oracle(a, b)?;
    methods
        .iter()
        .map(|meth| {
            let c = meth.run(a, b)?;
            Ok(ErrorReport {
                method: *meth,
                m: a.rows(),
                k: a.cols(),
                n: b.cols(),
                e_offset: point.map(|p| p.e_offset),
                signed: point.map(|p| p.signed),
                seed: point.map(|p| p.seed),
                norms: error_norms(&oracle, &c)?,
            })
        })
        .collect()
}

fn cmd_gemm(g: &GemmArgs, stdout: &mut dyn Write) -> Result<()> {
    if g.methods.is_empty() {
        return Err(Error::Domain("no methods requested".into()));
    }
    let methods: Vec<GemmMethod> = g.methods.iter().map(|&m| method_of(m, g.sb)).collect();
    let rows: Vec<ErrorReport> = match (&g.a, &g.b) {
        (Some(pa), Some(pb)) => {
            let a = sgcm::load(pa)?.into_f32()?;
            let b = sgcm::load(pb)?.into_f32()?;
            evaluate(&a, &b, &methods, None)?
        }
        _ => {
            if g.m == 0 || g.k == 0 || g.n == 0 {
                return Err(Error::Dimension(format!("empty problem {}x{}x{}", g.m, g.k, g.n)));
            }
            let exps: Vec<i32> = parse_list(&g.e_offset, "e_offset")?;
            let seeds: Vec<u64> = parse_list(&g.seeds, "seed")?;
            let points: Vec<SampleSpec> = exps
                .iter()
                .flat_map(|&e| seeds.iter().map(move |&s| SampleSpec::new(e, !g.nonneg, s)))
                .collect();
            let per_point: Vec<Vec<ErrorReport>> = points
                .par_iter()
                .map(|&p| {
                    let (a, b) = generate_pair(g.m, g.k, g.n, p)?;
                    evaluate(&a, &b, &methods, Some(p))
                })
                .collect::<Result<_>>()?;
            per_point.into_iter().flatten().collect()
        }
    };
    let mut csv = String::new();
    let _ = writeln!(csv, "{}", ErrorReport::CSV_HEADER);
    for r in &rows {
        let _ = writeln!(csv, "{}", r.csv_row());
    }
    emit(g.output.as_deref(), csv.into_bytes(), stdout)
}

fn cmd_errmodel(e: &ErrmodelArgs, stdout: &mut dyn Write) -> Result<()> {
    let rows = errmodel::curve(e.e_min, e.e_max, &e.sb)?;
    let mc: Option<Vec<errmodel::McUnderflow>> = match e.mc_samples {
        Some(n) => Some(
            (e.e_min..=e.e_max)
                .map(|x| errmodel::monte_carlo_underflow(x, n, e.seed))
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let mut csv = String::from("e_offset,p_underflow,p_underflow_gradual");
    for sb in &e.sb {
        let _ = write!(csv, ",bits_sb{sb}");
    }
    if mc.is_some() {
        csv.push_str(",mc_p_underflow,mc_p_underflow_gradual");
    }
    csv.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let _ = write!(csv, "{},{},{}", r.e_offset, r.p_underflow, r.p_underflow_gradual);
        for b in &r.bits {
            let _ = write!(csv, ",{b}");
        }
        if let Some(mc) = &mc {
            let _ = write!(csv, ",{},{}", mc[i].p(false), mc[i].p(true));
        }
        csv.push('\n');
    }
    emit(e.output.as_deref(), csv.into_bytes(), stdout)
}

fn load_hw(h: &HardwareArgs) -> Result<HardwareModel> {
    match &h.hw {
        Some(p) => HardwareModel::load(p),
        None => Ok(HardwareModel::default()),
    }
}

fn resolve_plan(
    hw: &HardwareModel,
    block: Option<&[usize]>,
    n_fused: Option<usize>,
    dims: (usize, usize, usize),
) -> Result<BlockPlan> {
    match block {
        Some(&[bm, bk, bn]) => match n_fused {
            Some(nf) => BlockPlan::with_n_fused(hw, bm, bk, bn, nf),
            None => BlockPlan::new(hw, bm, bk, bn),
        },
        Some(other) => Err(Error::Domain(format!("--block needs three sizes, got {}", other.len()))),
        None => Ok(planner::search(hw, dims.0, dims.1, dims.2)?.plan),
    }
}

fn cmd_plan(p: &PlanArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let hw = load_hw(&p.hardware)?;
    let plan = resolve_plan(&hw, p.block.as_deref(), p.n_fused, (p.m, p.k, p.n))?;
    let t = planner::traffic(&hw, p.m, p.k, p.n, &plan)?;
    let opt = planner::optimal_bm(&hw, plan.f)?;
    let mut csv = String::from("b_m,b_k,b_n,n_fused,f,a_read,b_read,c_readwrite,total\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{},{}",
        plan.b_m, plan.b_k, plan.b_n, plan.n_fused, plan.f, t.a_read, t.b_read, t.c_readwrite, t.total
    );
    emit(p.output.as_deref(), csv.into_bytes(), stdout)?;
    let _ = writeln!(
        stderr,
        "analytic b_m at f={:.4}: {:.2} (next multiple of 16: {}); continuous-model traffic {:.6e}",
        plan.f, opt.exact, opt.rounded, t.total_model
    );
    Ok(())
}

fn cmd_pipesim(p: &PipesimArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let hw = load_hw(&p.hardware)?;
    let plan = resolve_plan(&hw, p.block.as_deref(), p.n_fused, (p.m, p.k, p.n))?;
    let opts = SimOptions { record_events: p.trace.is_some() };
    let modes: &[Mode] = match p.mode {
        ModeArg::Single => &[Mode::Single],
        ModeArg::Double => &[Mode::Double],
        ModeArg::Both => &[Mode::Single, Mode::Double],
    };
    let traces = modes
        .iter()
        .map(|&m| pipesim::simulate_with(&hw, &plan, p.m, p.k, p.n, m, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut summary = format!("{}\n", pipesim::PipelineTrace::SUMMARY_HEADER);
    for t in &traces {
        let _ = writeln!(summary, "{}", t.summary_row());
    }
    let mut files = Vec::new();
    if let Some(path) = &p.trace {
        let mut csv = format!("{}\n", pipesim::PipelineTrace::EVENTS_HEADER);
        for t in &traces {
            for row in t.event_rows() {
                csv.push_str(&row);
                csv.push('\n');
            }
        }
        files.push((path.clone(), csv.into_bytes()));
    }
    match &p.output {
        Some(path) => {
            files.push((path.clone(), summary.into_bytes()));
            commit(&files)?;
        }
        None => {
            commit(&files)?;
            stdout.write_all(summary.as_bytes())?;
        }
    }
    if let [s, d] = traces.as_slice() {
        let _ = writeln!(stderr, "plan {plan}: double-buffering speedup {:.4}", s.total_time / d.total_time);
    }
    Ok(())
}

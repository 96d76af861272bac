//! Discrete-event cost model of the blocked GEMM pipeline, single- versus
//! double-buffered.
//!
//! The chip is modeled in aggregate: every stage runs at the chip-wide rate
//! of its resource, and B-block loads are shared by the cores working on
//! different row stripes. Per term pass and per row stripe, each group of
//! `n_fused` k-blocks first stages its A blocks; then, for every column
//! block, each k-block step loads, converts and stages a B block and runs one
//! block product; each column block ends with a read-add-write flush of its
//! C tile. The three split terms run as three identical passes.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::planner::{BlockPlan, HardwareModel};

/// Number of GEMM passes, one per split term.
pub const TERM_PASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    GmToUb,
    VecConvert,
    UbToL1,
    L1ToL0,
    Cube,
    L0cToUb,
    UbToGm,
    VecAdd,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::GmToUb,
        Stage::VecConvert,
        Stage::UbToL1,
        Stage::L1ToL0,
        Stage::Cube,
        Stage::L0cToUb,
        Stage::UbToGm,
        Stage::VecAdd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GmToUb => "gm_to_ub",
            Stage::VecConvert => "vec_convert",
            Stage::UbToL1 => "ub_to_l1",
            Stage::L1ToL0 => "l1_to_l0",
            Stage::Cube => "cube",
            Stage::L0cToUb => "l0c_to_ub",
            Stage::UbToGm => "ub_to_gm",
            Stage::VecAdd => "vec_add",
        }
    }

    pub fn resource(self) -> Resource {
        match self {
            Stage::GmToUb | Stage::UbToGm => Resource::Gm,
            Stage::VecConvert | Stage::VecAdd => Resource::Vec,
            Stage::UbToL1 | Stage::L0cToUb => Resource::UbL1,
            Stage::L1ToL0 => Resource::L1L0,
            Stage::Cube => Resource::Cube,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exclusive units; each runs one stage at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resource {
    /// The GM <-> UB channel.
    Gm,
    Vec,
    /// The UB <-> L1 channel, which also drains L0C.
    UbL1,
    L1L0,
    Cube,
}

impl Resource {
    pub const COUNT: usize = 5;

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Every stage waits for the previous one.
    Single,
    /// Two alternating B buffers and two L0C tiles let transfers overlap
    /// the block products.
    Double,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Double => "double",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Mode::Single),
            "double" => Ok(Mode::Double),
            other => Err(Error::Domain(format!("unknown buffering mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageCost {
    pub stage: Stage,
    pub duration: f64,
}

/// Durations of every stage for one block shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCosts {
    /// Staging of one A block: load, split into high part and residual, move
    /// to L1.
    pub a_gm_to_ub: f64,
    pub a_vec_convert: f64,
    pub a_ub_to_l1: f64,
    /// One k-block step: B block load (shared across stripes), conversion,
    /// staging, operand moves into L0 and the block product.
    pub b_gm_to_ub: f64,
    pub b_vec_convert: f64,
    pub b_ub_to_l1: f64,
    pub l1_to_l0: f64,
    pub cube: f64,
    /// Flush of one C tile into the running sum in GM.
    pub l0c_to_ub: f64,
    pub c_gm_to_ub: f64,
    pub c_vec_add: f64,
    pub c_ub_to_gm: f64,
}

impl BlockCosts {
    pub fn stages(&self) -> Vec<StageCost> {
        let c = |stage, duration| StageCost { stage, duration };
        vec![
            c(Stage::GmToUb, self.a_gm_to_ub),
            c(Stage::VecConvert, self.a_vec_convert),
            c(Stage::UbToL1, self.a_ub_to_l1),
            c(Stage::GmToUb, self.b_gm_to_ub),
            c(Stage::VecConvert, self.b_vec_convert),
            c(Stage::UbToL1, self.b_ub_to_l1),
            c(Stage::L1ToL0, self.l1_to_l0),
            c(Stage::Cube, self.cube),
            c(Stage::L0cToUb, self.l0c_to_ub),
            c(Stage::GmToUb, self.c_gm_to_ub),
            c(Stage::VecAdd, self.c_vec_add),
            c(Stage::UbToGm, self.c_ub_to_gm),
        ]
    }
}

const F32_BYTES: f64 = 4.0;

/// Costs for a `bm x bk` A block, `bk x bn` B block and `bm x bn` C tile.
/// `b_share` is the fraction of a B-block load charged to one step.
fn block_costs(hw: &HardwareModel, bm: usize, bk: usize, bn: usize, b_share: f64) -> BlockCosts {
    let half = hw.bytes_per_half as f64;
    let gm = hw.gm_bandwidth_bytes_per_s;
    let ub = hw.ub_l1_bandwidth_bytes_per_s;
    let l0 = hw.l1_l0_bandwidth_bytes_per_s;
    let vec = hw.vec_rate();
    let (a, b, c) = ((bm * bk) as f64, (bk * bn) as f64, (bm * bn) as f64);
    BlockCosts {
        a_gm_to_ub: a * F32_BYTES / gm,
        // one pass to round, one to form and round the scaled residual
        a_vec_convert: 2.0 * a / vec,
        a_ub_to_l1: a * half / ub,
        b_gm_to_ub: b * b_share * F32_BYTES / gm,
        b_vec_convert: b * b_share / vec,
        b_ub_to_l1: b * half / ub,
        l1_to_l0: (a + b) * half / l0,
        cube: 2.0 * a * bn as f64 / hw.cube_flops_per_s,
        l0c_to_ub: c * F32_BYTES / ub,
        c_gm_to_ub: c * F32_BYTES / gm,
        c_vec_add: c / vec,
        c_ub_to_gm: c * F32_BYTES / gm,
    }
}

fn check_plan(hw: &HardwareModel, plan: &BlockPlan) -> Result<()> {
    hw.validate()?;
    if plan.b_m == 0 || plan.b_k == 0 || plan.b_n == 0 || plan.n_fused == 0 {
        return Err(Error::Plan(format!("degenerate plan {plan}")));
    }
    Ok(())
}

/// Stage durations for a full-size block of `plan`, with B loads shared by
/// `n_core` stripes.
pub fn stage_costs(hw: &HardwareModel, plan: &BlockPlan) -> Result<BlockCosts> {
    check_plan(hw, plan)?;
    Ok(block_costs(hw, plan.b_m, plan.b_k, plan.b_n, 1.0 / hw.n_core as f64))
}

/// One unit of work for the list scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub stage: Stage,
    pub duration: f64,
    pub block_id: u64,
    /// Alternating buffer slot, for tasks that occupy one.
    pub buffer: Option<u8>,
}

/// Tasks in program order with their predecessors.
#[derive(Debug, Default, Clone)]
pub struct TaskGraph {
    tasks: Vec<Task>,
    preds: Vec<[u32; 3]>,
    npreds: Vec<u8>,
}

pub type TaskId = u32;

impl TaskGraph {
    pub fn new() -> Self {
        TaskGraph::default()
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    /// Appends a task; at most three predecessors, all already present.
    pub fn push(&mut self, task: Task, deps: &[Option<TaskId>]) -> TaskId {
        let id = self.tasks.len() as TaskId;
        let mut p = [0u32; 3];
        let mut n = 0;
        for d in deps.iter().flatten() {
            assert!(*d < id, "dependency on a later task");
            assert!(n < 3, "too many dependencies");
            p[n] = *d;
            n += 1;
        }
        self.tasks.push(task);
        self.preds.push(p);
        self.npreds.push(n as u8);
        id
    }

    /// Non-preemptive list schedule: whenever a resource is idle it starts
    /// the earliest-issued task whose predecessors have all finished.
    /// Returns `(start, end)` per task.
    pub fn schedule(&self) -> Vec<(f64, f64)> {
        let n = self.tasks.len();
        let mut succ_start = vec![0u32; n + 1];
        for (i, p) in self.preds.iter().enumerate() {
            for &d in &p[..self.npreds[i] as usize] {
                succ_start[d as usize + 1] += 1;
            }
        }
        for i in 0..n {
            succ_start[i + 1] += succ_start[i];
        }
        let mut fill = succ_start.clone();
        let mut succ = vec![0u32; succ_start[n] as usize];
        for (i, p) in self.preds.iter().enumerate() {
            for &d in &p[..self.npreds[i] as usize] {
                succ[fill[d as usize] as usize] = i as u32;
                fill[d as usize] += 1;
            }
        }

        let mut waiting: Vec<u8> = self.npreds.clone();
        let mut ready: Vec<BinaryHeap<Reverse<u32>>> = (0..Resource::COUNT).map(|_| BinaryHeap::new()).collect();
        let mut busy = [false; Resource::COUNT];
        let mut running: BinaryHeap<Reverse<(OrdF64, u32)>> = BinaryHeap::new();
        let mut times = vec![(0.0, 0.0); n];
        for (i, t) in self.tasks.iter().enumerate() {
            if waiting[i] == 0 {
                ready[t.stage.resource().index()].push(Reverse(i as u32));
            }
        }
        let mut now = 0.0;
        loop {
            for r in 0..Resource::COUNT {
                if !busy[r] {
                    if let Some(Reverse(id)) = ready[r].pop() {
                        let end = now + self.tasks[id as usize].duration;
                        times[id as usize] = (now, end);
                        busy[r] = true;
                        running.push(Reverse((OrdF64(end), id)));
                    }
                }
            }
            let Some(Reverse((OrdF64(t), _))) = running.peek().copied() else { break };
            now = t;
            while let Some(&Reverse((OrdF64(te), id))) = running.peek() {
                if te != t {
                    break;
                }
                running.pop();
                busy[self.tasks[id as usize].stage.resource().index()] = false;
                for &s in &succ[succ_start[id as usize] as usize..succ_start[id as usize + 1] as usize] {
                    waiting[s as usize] -= 1;
                    if waiting[s as usize] == 0 {
                        ready[self.tasks[s as usize].stage.resource().index()].push(Reverse(s));
                    }
                }
            }
        }
        times
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Builder that chains every task behind the previous one in single mode.
struct Issuer {
    graph: TaskGraph,
    mode: Mode,
    last: Option<TaskId>,
}

impl Issuer {
    fn issue(&mut self, task: Task, deps: &[Option<TaskId>]) -> TaskId {
        let id = match self.mode {
            Mode::Single => self.graph.push(task, &[self.last]),
            Mode::Double => self.graph.push(task, deps),
        };
        self.last = Some(id);
        id
    }
}

fn task(stage: Stage, duration: f64, block_id: u64, buffer: Option<u8>) -> Task {
    Task { stage, duration, block_id, buffer }
}

/// Task graph of one term pass.
pub fn build_pass(hw: &HardwareModel, plan: &BlockPlan, m: usize, k: usize, n: usize, mode: Mode) -> Result<TaskGraph> {
    check_plan(hw, plan)?;
    if m == 0 || k == 0 || n == 0 {
        return Err(Error::Plan(format!("empty problem {m}x{k}x{n}")));
    }
    let stripes = m.div_ceil(plan.b_m);
    let b_share = stripes.div_ceil(hw.n_core as usize) as f64 / stripes as f64;
    let group_len = plan.b_k * plan.n_fused;
    let mut is = Issuer { graph: TaskGraph::new(), mode, last: None };

    // Completion of the B-step two back (buffer reuse) and of the C flush
    // two column blocks back (L0C tile reuse).
    let mut cube_hist: [Option<TaskId>; 2] = [None, None];
    let mut flush_hist: [Option<TaskId>; 2] = [None, None];
    let mut last_cube: Option<TaskId> = None;
    let (mut step, mut tile, mut group_id) = (0u64, 0u64, 0u64);

    for i0 in (0..m).step_by(plan.b_m) {
        let bm = plan.b_m.min(m - i0);
        for g0 in (0..k).step_by(group_len) {
            let g1 = (g0 + group_len).min(k);
            // Stage the group's A blocks; L1 holds one group at a time.
            let mut a_ready = None;
            let mut prev = last_cube;
            for l0 in (g0..g1).step_by(plan.b_k) {
                let bk = plan.b_k.min(g1 - l0);
                let c = block_costs(hw, bm, bk, plan.b_n, b_share);
                let t1 = is.issue(task(Stage::GmToUb, c.a_gm_to_ub, group_id, None), &[prev]);
                let t2 = is.issue(task(Stage::VecConvert, c.a_vec_convert, group_id, None), &[Some(t1)]);
                let t3 = is.issue(task(Stage::UbToL1, c.a_ub_to_l1, group_id, None), &[Some(t2), a_ready]);
                a_ready = Some(t3);
                prev = last_cube;
            }
            group_id += 1;

            for j0 in (0..n).step_by(plan.b_n) {
                let bn = plan.b_n.min(n - j0);
                let slot_c = (tile % 2) as u8;
                let mut first = true;
                for l0 in (g0..g1).step_by(plan.b_k) {
                    let bk = plan.b_k.min(g1 - l0);
                    let c = block_costs(hw, bm, bk, bn, b_share);
                    let slot = (step % 2) as u8;
                    let reuse = cube_hist[slot as usize];
                    let t1 = is.issue(task(Stage::GmToUb, c.b_gm_to_ub, step, Some(slot)), &[reuse]);
                    let t2 = is.issue(task(Stage::VecConvert, c.b_vec_convert, step, Some(slot)), &[Some(t1)]);
                    let t3 = is.issue(task(Stage::UbToL1, c.b_ub_to_l1, step, Some(slot)), &[Some(t2)]);
                    let t4 = is.issue(task(Stage::L1ToL0, c.l1_to_l0, step, Some(slot)), &[Some(t3), a_ready]);
                    let l0c_free = if first { flush_hist[slot_c as usize] } else { None };
                    let t5 = is.issue(task(Stage::Cube, c.cube, step, Some(slot)), &[Some(t4), l0c_free]);
                    cube_hist[slot as usize] = Some(t5);
                    last_cube = Some(t5);
                    first = false;
                    step += 1;
                }
                let c = block_costs(hw, bm, plan.b_k, bn, b_share);
                let f1 = is.issue(task(Stage::L0cToUb, c.l0c_to_ub, tile, Some(slot_c)), &[last_cube]);
                let f2 = is.issue(task(Stage::GmToUb, c.c_gm_to_ub, tile, Some(slot_c)), &[Some(f1)]);
                let f3 = is.issue(task(Stage::VecAdd, c.c_vec_add, tile, Some(slot_c)), &[Some(f2)]);
                is.issue(task(Stage::UbToGm, c.c_ub_to_gm, tile, Some(slot_c)), &[Some(f3)]);
                flush_hist[slot_c as usize] = Some(f1);
                tile += 1;
            }
        }
    }
    Ok(is.graph)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    /// Term pass, `0..TERM_PASSES`.
    pub pass: u8,
    pub stage: Stage,
    pub block_id: u64,
    pub buffer: Option<u8>,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineTrace {
    pub mode: Mode,
    /// Empty unless events were requested.
    pub events: Vec<TraceEvent>,
    pub total_time: f64,
    pub cube_busy: f64,
    pub utilization: f64,
    pub effective_flops: f64,
    pub tasks_per_pass: usize,
}

impl PipelineTrace {
    pub const SUMMARY_HEADER: &'static str = "mode,total_s,cube_busy_s,utilization,effective_tflops";
    pub const EVENTS_HEADER: &'static str = "mode,stage,block_id,start_s,end_s";

    pub fn summary_row(&self) -> String {
        format!(
            "{},{:e},{:e},{},{}",
            self.mode.name(),
            self.total_time,
            self.cube_busy,
            self.utilization,
            self.effective_flops / 1e12
        )
    }

    pub fn event_rows(&self) -> impl Iterator<Item = String> + '_ {
        self.events.iter().map(move |e| {
            format!("{},{},{},{:e},{:e}", self.mode.name(), e.stage, e.block_id, e.start, e.end)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimOptions {
    pub record_events: bool,
}

/// Simulates the three term passes back to back.
pub fn simulate(hw: &HardwareModel, plan: &BlockPlan, m: usize, k: usize, n: usize, mode: Mode) -> Result<PipelineTrace> {
    simulate_with(hw, plan, m, k, n, mode, SimOptions { record_events: true })
}

pub fn simulate_with(
    hw: &HardwareModel,
    plan: &BlockPlan,
    m: usize,
    k: usize,
    n: usize,
    mode: Mode,
    opts: SimOptions,
) -> Result<PipelineTrace> {
    let graph = build_pass(hw, plan, m, k, n, mode)?;
    let times = graph.schedule();
    let pass_time = times.iter().map(|t| t.1).fold(0.0, f64::max);
    let cube_pass: f64 = graph
        .tasks()
        .iter()
        .filter(|t| t.stage == Stage::Cube)
        .map(|t| t.duration)
        .sum();
    let mut events = Vec::new();
    if opts.record_events {
        events.reserve(graph.len() * TERM_PASSES);
        for pass in 0..TERM_PASSES {
            let off = pass as f64 * pass_time;
            for (t, &(s, e)) in graph.tasks().iter().zip(&times) {
                events.push(TraceEvent {
                    pass: pass as u8,
                    stage: t.stage,
                    block_id: t.block_id,
                    buffer: t.buffer,
                    start: off + s,
                    end: off + e,
                });
            }
        }
    }
    let total_time = pass_time * TERM_PASSES as f64;
    let cube_busy = cube_pass * TERM_PASSES as f64;
    let flops = 2.0 * m as f64 * k as f64 * n as f64 * TERM_PASSES as f64;
    Ok(PipelineTrace {
        mode,
        events,
        total_time,
        cube_busy,
        utilization: cube_busy / total_time,
        effective_flops: flops / total_time,
        tasks_per_pass: graph.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// `single.total_time / double.total_time`.
    pub speedup: f64,
    pub single: PipelineTrace,
    pub double: PipelineTrace,
}

pub fn compare(hw: &HardwareModel, plan: &BlockPlan, m: usize, k: usize, n: usize, opts: SimOptions) -> Result<Comparison> {
    let single = simulate_with(hw, plan, m, k, n, Mode::Single, opts)?;
    let double = simulate_with(hw, plan, m, k, n, Mode::Double, opts)?;
    Ok(Comparison { speedup: single.total_time / double.total_time, single, double })
}

/// A minimal pipeline of `blocks` steps, each one load then one product,
/// on separate resources. Returns the total time.
pub fn simulate_uniform(blocks: usize, load: f64, compute: f64, mode: Mode) -> f64 {
    let mut is = Issuer { graph: TaskGraph::new(), mode, last: None };
    let mut hist: [Option<TaskId>; 2] = [None, None];
    for b in 0..blocks {
        let slot = b % 2;
        let l = is.issue(task(Stage::GmToUb, load, b as u64, Some(slot as u8)), &[hist[slot]]);
        hist[slot] = Some(is.issue(task(Stage::Cube, compute, b as u64, Some(slot as u8)), &[Some(l)]));
    }
    is.graph.schedule().iter().map(|t| t.1).fold(0.0, f64::max)
}

//! Cache-aware block selection: how many A blocks stay resident in L1, how
//! much main-memory traffic a tiling costs, and which tilings the matrix
//! engine's buffers admit.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Granularity of every block dimension.
pub const BLOCK_ALIGN: usize = 16;

/// Capacities, core count and rates of the modeled accelerator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareModel {
    pub l1_bytes: u64,
    /// L0A capacity in half elements.
    pub l0a_limit: u64,
    /// L0B capacity in half elements.
    pub l0b_limit: u64,
    /// Shared L0C/UB budget in bytes.
    pub ub_l0c_limit: u64,
    /// Bytes charged against `ub_l0c_limit` per output element.
    pub ub_l0c_factor: u64,
    pub n_core: u64,
    pub bytes_per_half: u64,
    pub gm_bandwidth_bytes_per_s: f64,
    /// Aggregate half-precision matrix-engine rate over all cores.
    pub cube_flops_per_s: f64,
    pub clock_hz: f64,
    pub ub_l1_bandwidth_bytes_per_s: f64,
    pub l1_l0_bandwidth_bytes_per_s: f64,
    /// Vector-unit rate in binary32 elements per second; `None` means bound
    /// by the unified-buffer bandwidth at four bytes per element.
    pub vec_elements_per_s: Option<f64>,
}

impl Default for HardwareModel {
    fn default() -> Self {
        HardwareModel {
            l1_bytes: 512 * 1024,
            l0a_limit: 64 * 256,
            l0b_limit: 64 * 256,
            ub_l0c_limit: 248 * 1024,
            ub_l0c_factor: 6,
            n_core: 32,
            bytes_per_half: 2,
            gm_bandwidth_bytes_per_s: 1.2e12,
            cube_flops_per_s: 256e12,
            clock_hz: 1e9,
            ub_l1_bandwidth_bytes_per_s: 12e12,
            l1_l0_bandwidth_bytes_per_s: 12e12,
            vec_elements_per_s: None,
        }
    }
}

impl HardwareModel {
    pub fn validate(&self) -> Result<()> {
        let ints = [
            ("l1_bytes", self.l1_bytes),
            ("l0a_limit", self.l0a_limit),
            ("l0b_limit", self.l0b_limit),
            ("ub_l0c_limit", self.ub_l0c_limit),
            ("ub_l0c_factor", self.ub_l0c_factor),
            ("n_core", self.n_core),
            ("bytes_per_half", self.bytes_per_half),
        ];
        if let Some((name, _)) = ints.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        let rates = [
            ("gm_bandwidth_bytes_per_s", self.gm_bandwidth_bytes_per_s),
            ("cube_flops_per_s", self.cube_flops_per_s),
            ("clock_hz", self.clock_hz),
            ("ub_l1_bandwidth_bytes_per_s", self.ub_l1_bandwidth_bytes_per_s),
            ("l1_l0_bandwidth_bytes_per_s", self.l1_l0_bandwidth_bytes_per_s),
            ("vec_elements_per_s", self.vec_elements_per_s.unwrap_or(1.0)),
        ];
        if let Some((name, _)) = rates.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("{name} must be positive and finite")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let hw: HardwareModel =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        hw.validate()?;
        Ok(hw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        HardwareModel::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hardware model serializes")
    }

    /// L1 capacity in half elements.
    pub fn l1_half_capacity(&self) -> u64 {
        self.l1_bytes / self.bytes_per_half
    }

    pub fn vec_rate(&self) -> f64 {
        self.vec_elements_per_s.unwrap_or(self.ub_l1_bandwidth_bytes_per_s / 4.0)
    }
}

/// A tiling decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockPlan {
    pub b_m: usize,
    pub b_k: usize,
    pub b_n: usize,
    /// A blocks resident in L1 per fused group.
    pub n_fused: usize,
    /// Fraction of L1 the resident A blocks occupy.
    pub f: f64,
}

impl BlockPlan {
    /// Plan with `n_fused` taken from the L1 capacity.
    pub fn new(hw: &HardwareModel, b_m: usize, b_k: usize, b_n: usize) -> Result<Self> {
        BlockPlan::with_n_fused(hw, b_m, b_k, b_n, n_fused(hw, b_m, b_k, b_n))
    }

    /// Plan with an explicit `n_fused`, checked against the hardware limits
    /// and the L1 capacity.
    pub fn with_n_fused(
        hw: &HardwareModel,
        b_m: usize,
        b_k: usize,
        b_n: usize,
        n_fused: usize,
    ) -> Result<Self> {
        let v = check_limits(hw, b_m, b_k, b_n);
        if !v.is_empty() {
            let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            return Err(Error::Plan(list.join("; ")));
        }
        if n_fused == 0 {
            return Err(Error::Plan(format!(
                "({b_m}, {b_k}, {b_n}) leaves no room in L1 for an A block"
            )));
        }
        let used = (n_fused * b_m * b_k + 2 * b_k * b_n) as u64;
        if used > hw.l1_half_capacity() {
            return Err(Error::Plan(format!(
                "{n_fused} A blocks plus two B blocks need {used} elements, L1 holds {}",
                hw.l1_half_capacity()
            )));
        }
        Ok(BlockPlan { b_m, b_k, b_n, n_fused, f: fill_fraction(hw, b_m, b_k, n_fused) })
    }
}

impl fmt::Display for BlockPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, n_fused={})", self.b_m, self.b_k, self.b_n, self.n_fused)
    }
}

/// A blocks of `b_m x b_k` that fit in L1 next to a double-buffered
/// `b_k x b_n` B block. May be zero.
pub fn n_fused(hw: &HardwareModel, b_m: usize, b_k: usize, b_n: usize) -> usize {
    let cap = hw.l1_half_capacity() as i128;
    let b_pair = 2 * (b_k * b_n) as i128;
    let a_block = (b_m * b_k) as i128;
    if a_block == 0 || cap < b_pair {
        return 0;
    }
    ((cap - b_pair) / a_block) as usize
}

pub fn fill_fraction(hw: &HardwareModel, b_m: usize, b_k: usize, n_fused: usize) -> f64 {
    (n_fused * b_m * b_k) as f64 * hw.bytes_per_half as f64 / hw.l1_bytes as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Zero { dim: char },
    Misaligned { dim: char, value: usize },
    L0a { need: u64, limit: u64 },
    L0b { need: u64, limit: u64 },
    UbL0c { need: u64, limit: u64 },
}

impl Violation {
    /// Amount by which the constraint is exceeded.
    pub fn margin(&self) -> u64 {
        match *self {
            Violation::Zero { .. } => 1,
            Violation::Misaligned { value, .. } => (value % BLOCK_ALIGN) as u64,
            Violation::L0a { need, limit }
            | Violation::L0b { need, limit }
            | Violation::UbL0c { need, limit } => need - limit,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Zero { dim } => write!(f, "b_{dim} is zero"),
            Violation::Misaligned { dim, value } => {
                write!(f, "b_{dim} = {value} is not a multiple of {BLOCK_ALIGN}")
            }
            Violation::L0a { need, limit } => write!(f, "b_m*b_k = {need} > L0A limit {limit}"),
            Violation::L0b { need, limit } => write!(f, "b_k*b_n = {need} > L0B limit {limit}"),
            Violation::UbL0c { need, limit } => {
                write!(f, "b_m*b_n*factor = {need} > L0C/UB limit {limit}")
            }
        }
    }
}

/// Every violated block constraint; empty when the shape is admissible.
pub fn check_limits(hw: &HardwareModel, b_m: usize, b_k: usize, b_n: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    for (dim, value) in [('m', b_m), ('k', b_k), ('n', b_n)] {
        if value == 0 {
            out.push(Violation::Zero { dim });
        } else if value % BLOCK_ALIGN != 0 {
            out.push(Violation::Misaligned { dim, value });
        }
    }
    let (m, k, n) = (b_m as u64, b_k as u64, b_n as u64);
    if m * k > hw.l0a_limit {
        out.push(Violation::L0a { need: m * k, limit: hw.l0a_limit });
    }
    if k * n > hw.l0b_limit {
        out.push(Violation::L0b { need: k * n, limit: hw.l0b_limit });
    }
    let c = m * n * hw.ub_l0c_factor;
    if c > hw.ub_l0c_limit {
        out.push(Violation::UbL0c { need: c, limit: hw.ub_l0c_limit });
    }
    out
}

/// Main-memory traffic of a tiling, in elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficReport {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    /// Block counts `(M, K, N)`.
    pub blocks: (usize, usize, usize),
    pub a_read: u64,
    pub b_read: u64,
    pub c_readwrite: u64,
    pub total: u64,
    /// Continuous-ratio forms, as used for the analytic curve.
    pub a_read_model: f64,
    pub b_read_model: f64,
    pub c_readwrite_model: f64,
    pub total_model: f64,
}

fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Exact traffic counts whole blocks: every B block is reloaded once per
/// round of `n_core` stripes, and every C block is read and written once per
/// fused group.
pub fn traffic(hw: &HardwareModel, m: usize, k: usize, n: usize, plan: &BlockPlan) -> Result<TrafficReport> {
    if m == 0 || k == 0 || n == 0 {
        return Err(Error::Plan(format!("empty problem {m}x{k}x{n}")));
    }
    if plan.n_fused == 0 || plan.b_m == 0 || plan.b_k == 0 || plan.b_n == 0 {
        return Err(Error::Plan(format!("degenerate plan {plan}")));
    }
    let (bm, bk, bn) = (plan.b_m, plan.b_k, plan.b_n);
    let (mb, kb, nb) = (div_ceil(m, bm), div_ceil(k, bk), div_ceil(n, bn));
    let n_core = hw.n_core as usize;

    let a_read = (m * k) as u64;
    let b_read = (bk * bn * kb * nb * div_ceil(mb, n_core)) as u64;
    let c_readwrite = (2 * bm * bn * mb * nb * div_ceil(kb, plan.n_fused)) as u64;

    let (mf, kf, nf) = (m as f64, k as f64, n as f64);
    let a_model = mf * kf;
    let b_model = mf * kf * nf / (n_core as f64 * bm as f64);
    let c_model = 2.0 * mf * nf * kf / (bk as f64 * plan.n_fused as f64);
    Ok(TrafficReport {
        m,
        k,
        n,
        blocks: (mb, kb, nb),
        a_read,
        b_read,
        c_readwrite,
        total: a_read + b_read + c_readwrite,
        a_read_model: a_model,
        b_read_model: b_model,
        c_readwrite_model: c_model,
        total_model: a_model + b_model + c_model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalBm {
    pub exact: f64,
    /// Smallest multiple of 16 at or above `exact`.
    pub rounded: usize,
}

/// Row-block height that balances B reloads against C round trips.
/// `l1_bytes` enters in bytes.
pub fn optimal_bm(hw: &HardwareModel, f: f64) -> Result<OptimalBm> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::Domain(format!("fill fraction {f} outside (0, 1]")));
    }
    let exact = (f * hw.l1_bytes as f64 / (2.0 * hw.n_core as f64)).sqrt();
    let rounded = ((exact / BLOCK_ALIGN as f64).ceil() as usize).max(1) * BLOCK_ALIGN;
    Ok(OptimalBm { exact, rounded })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub plan: BlockPlan,
    pub traffic: TrafficReport,
}

/// Every admissible block shape with room for at least one A block.
pub fn candidates(hw: &HardwareModel) -> Vec<BlockPlan> {
    let max_side = hw.l0a_limit.max(hw.l0b_limit) as usize / BLOCK_ALIGN;
    let grid: Vec<usize> = (1..=max_side / BLOCK_ALIGN).map(|i| i * BLOCK_ALIGN).collect();
    let mut out = Vec::new();
    for &bm in &grid {
        for &bk in &grid {
            if (bm * bk) as u64 > hw.l0a_limit {
                break;
            }
            for &bn in &grid {
                if !check_limits(hw, bm, bk, bn).is_empty() {
                    break;
                }
                if let Ok(p) = BlockPlan::new(hw, bm, bk, bn) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Minimum exact-traffic plan over all admissible shapes. Ties prefer the
/// larger A block, then the lexicographically smallest shape.
pub fn search(hw: &HardwareModel, m: usize, k: usize, n: usize) -> Result<SearchResult> {
    hw.validate()?;
    if m < BLOCK_ALIGN || k < BLOCK_ALIGN || n < BLOCK_ALIGN {
        return Err(Error::NoFeasiblePlan { m, k, n });
    }
    candidates(hw)
        .into_par_iter()
        .map(|plan| traffic(hw, m, k, n, &plan).map(|t| SearchResult { plan, traffic: t }))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| {
            a.traffic
                .total
                .cmp(&b.traffic.total)
                .then((b.plan.b_m * b.plan.b_k).cmp(&(a.plan.b_m * a.plan.b_k)))
                .then((a.plan.b_m, a.plan.b_k, a.plan.b_n).cmp(&(b.plan.b_m, b.plan.b_k, b.plan.b_n)))
        })
        .ok_or(Error::NoFeasiblePlan { m, k, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hw() -> HardwareModel {
        HardwareModel::default()
    }

    #[test]
    fn fused_count_examples() {
        assert_eq!(n_fused(&hw(), 176, 64, 176), 21);
        let p = BlockPlan::new(&hw(), 176, 64, 176).unwrap();
        assert!((p.f - 21.0 * 11264.0 / 262144.0).abs() < 1e-12);
        assert!((p.f - 0.902).abs() < 1e-3);
        assert_eq!(n_fused(&hw(), 16, 1024, 16 * 1024), 0);
    }

    #[test]
    fn traffic_example() {
        let p = BlockPlan::new(&hw(), 176, 64, 176).unwrap();
        let t = traffic(&hw(), 352, 64, 176, &p).unwrap();
        assert_eq!(t.a_read, 22528);
        assert_eq!(t.b_read_model, 704.0);
        assert_eq!(t.c_readwrite, 123904);
        assert_eq!(t.blocks, (2, 1, 1));
        assert_eq!(t.total, t.a_read + t.b_read + t.c_readwrite);
    }

    #[test]
    fn one_stripe_per_core_loads_b_once() {
        let h = HardwareModel { n_core: 4, ..hw() };
        let p = BlockPlan::new(&h, 64, 64, 64).unwrap();
        let t = traffic(&h, 256, 128, 192, &p).unwrap();
        assert_eq!(t.b_read, 128 * 192);
        assert_eq!(t.b_read_model, (128 * 192) as f64);
    }

    #[test]
    fn doubling_bm_halves_b_model() {
        let p1 = BlockPlan::new(&hw(), 64, 64, 64).unwrap();
        let p2 = BlockPlan::new(&hw(), 128, 64, 64).unwrap();
        let t1 = traffic(&hw(), 4096, 4096, 4096, &p1).unwrap();
        let t2 = traffic(&hw(), 4096, 4096, 4096, &p2).unwrap();
        assert_eq!(t1.b_read_model, 2.0 * t2.b_read_model);
    }

    #[test]
    fn limit_examples() {
        assert!(check_limits(&hw(), 176, 64, 176).is_empty());
        let v = check_limits(&hw(), 256, 64, 256);
        assert_eq!(v, vec![Violation::UbL0c { need: 393216, limit: 253952 }]);
        assert_eq!(v[0].margin(), 393216 - 253952);
        let v = check_limits(&hw(), 100, 64, 64);
        assert_eq!(v, vec![Violation::Misaligned { dim: 'm', value: 100 }]);
        assert!(BlockPlan::new(&hw(), 100, 64, 64).is_err());
    }

    #[test]
    fn override_must_fit() {
        assert!(BlockPlan::with_n_fused(&hw(), 176, 64, 176, 21).is_ok());
        assert!(BlockPlan::with_n_fused(&hw(), 176, 64, 176, 44).is_err());
        let doubled = HardwareModel { l1_bytes: 2 * 512 * 1024, ..hw() };
        assert_eq!(n_fused(&doubled, 176, 64, 176), 44);
    }

    #[test]
    fn optimal_bm_examples() {
        let a = optimal_bm(&hw(), 0.92).unwrap();
        assert!((a.exact - 86.8).abs() < 0.05);
        let b = optimal_bm(&hw(), 1.0).unwrap();
        assert!((b.exact - 90.5).abs() < 0.05);
        assert_eq!(b.rounded, 96);
        let h = HardwareModel { n_core: 8, ..hw() };
        assert!((optimal_bm(&h, 1.0).unwrap().exact - 181.0).abs() < 0.02);
        assert!(optimal_bm(&hw(), 0.0).is_err());
    }

    #[test]
    fn tiny_problem_picks_smallest_blocks() {
        let r = search(&hw(), 16, 16, 16).unwrap();
        assert_eq!((r.plan.b_m, r.plan.b_k, r.plan.b_n), (16, 16, 16));
        assert!(r.plan.n_fused > 1000);
        assert!(matches!(search(&hw(), 8, 16, 16), Err(Error::NoFeasiblePlan { .. })));
    }

    #[test]
    fn candidates_respect_capacity() {
        let h = hw();
        for p in candidates(&h) {
            assert!(p.n_fused >= 1);
            assert!(p.f > 0.0 && p.f <= 1.0);
            assert!((p.n_fused * p.b_m * p.b_k + 2 * p.b_k * p.b_n) as u64 <= h.l1_half_capacity());
        }
    }

    #[test]
    fn config_round_trip_and_rejection() {
        let h = hw();
        assert_eq!(HardwareModel::from_json(&h.to_json()).unwrap(), h);
        assert_eq!(HardwareModel::from_json(r#"{"n_core": 8}"#).unwrap().n_core, 8);
        assert!(HardwareModel::from_json(r#"{"n_cores": 8}"#).is_err());
        assert!(HardwareModel::from_json(r#"{"n_core": 0}"#).is_err());
    }
}

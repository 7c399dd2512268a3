//! Monte Carlo of the jump process. Holding times follow the survival
//! function `exp(-∫ λ_v(x) dv)`, targets the normalised kernel
//! `q_t(x, ·) / λ_t(x)`, and the reserve is estimated as the mean
//! discounted value of the realised payment stream.
//!
//! Cumulative hazards are integrated by the trapezoid rule on a fixed
//! sub-grid and inverted by bisection plus linear interpolation in the
//! bracketing cell. Kernels exposing a hazard basis have the integrals
//! tabulated once per simulator; others are integrated path by path.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::fmt_f64;
use crate::error::{Error, Result};
use crate::model::{total_rate, Discount, IntensityKernel, PaymentSpec, State};

/// One trajectory `Y_0, J_1, Y_1, J_2, …` truncated at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub jump_times: Vec<f64>,
    /// `Y_0, Y_1, …`; one more entry than `jump_times`.
    pub states: Vec<State>,
    pub pv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
}

impl McEstimate {
    /// `(reference - mean) / std_error`; infinite when the estimate is
    /// degenerate and disagrees, zero when it is degenerate and agrees.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = reference - self.mean;
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }
}

/// `∫ f_i` at sub-grid nodes for every basis function of the kernel.
struct HazardTable {
    cum: Vec<Vec<f64>>,
}

pub struct Simulator<'a, K: IntensityKernel + ?Sized> {
    kernel: &'a K,
    payments: &'a PaymentSpec,
    discount: &'a Discount,
    start: f64,
    end: f64,
    nodes: usize,
    h: f64,
    table: Option<HazardTable>,
    terminal: Vec<(State, f64)>,
}

impl<'a, K: IntensityKernel + ?Sized> Simulator<'a, K> {
    /// Paths live on `[start, end]`; `substep` is the hazard integration
    /// step (rounded down so it divides the interval).
    pub fn new(
        kernel: &'a K,
        payments: &'a PaymentSpec,
        discount: &'a Discount,
        start: f64,
        end: f64,
        substep: f64,
    ) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::Invalid(format!("simulation interval [{start}, {end}] is invalid")));
        }
        if !(substep > 0.0 && substep.is_finite()) {
            return Err(Error::Invalid("simulation sub-step must be positive".into()));
        }
        let nodes = ((end - start) / substep - 1e-9).ceil().max(1.0) as usize;
        let h = (end - start) / nodes as f64;
        let mut sim = Simulator { kernel, payments, discount, start, end, nodes, h, table: None, terminal: Vec::new() };
        let basis = kernel.hazard_basis();
        if !basis.is_empty() {
            let cum = basis
                .par_iter()
                .enumerate()
                .map(|(i, f)| {
                    let mut c = Vec::with_capacity(nodes + 1);
                    let mut acc = 0.0;
                    let mut prev = f.eval(start);
                    c.push(0.0);
                    for m in 1..=nodes {
                        let t = sim.node(m);
                        let cur = f.eval(t);
                        if !cur.is_finite() {
                            return Err(Error::NonFinite { t, state: format!("hazard basis {i}") });
                        }
                        acc += 0.5 * (prev + cur) * h;
                        c.push(acc);
                        prev = cur;
                    }
                    Ok(c)
                })
                .collect::<Result<_>>()?;
            sim.table = Some(HazardTable { cum });
        }
        Ok(sim)
    }

    /// Value added at `end` for paths in `state` there.
    pub fn with_terminal(mut self, terminal: Vec<(State, f64)>) -> Self {
        self.terminal = terminal;
        self
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    #[inline]
    fn node(&self, m: usize) -> f64 {
        if m == self.nodes {
            self.end
        } else {
            self.start + m as f64 * self.h
        }
    }

    /// Cell index `m` with `node(m) <= t < node(m + 1)`, clamped.
    fn cell(&self, t: f64) -> usize {
        (((t - self.start) / self.h).floor().max(0.0) as usize).min(self.nodes - 1)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-9 * self.end.abs().max(1.0);
        if t < self.start - slack || t > self.end + slack {
            return Err(Error::OutsideHorizon { t, start: self.start, end: self.end });
        }
        Ok(())
    }

    /// Draws `(J, Y)` for the next jump after `t` from `x`, or `None` if the
    /// process stays in `x` up to the horizon.
    pub fn sample_next_jump<R: Rng>(&self, t: f64, x: &State, rng: &mut R) -> Result<Option<(f64, State)>> {
        self.check_time(t)?;
        let e = loop {
            let e = -(1.0 - rng.random::<f64>()).ln();
            if e > 0.0 {
                break e;
            }
        };
        let jump = match (&self.table, self.kernel.hazard_weights(x)) {
            (Some(table), Some(w)) => self.invert_tabulated(table, &w, t, e),
            _ => self.invert_stepping(t, x, e)?,
        };
        let Some(j) = jump else {
            return Ok(None);
        };
        let j = if j > t { j } else { t.next_up() };
        if j > self.end {
            return Ok(None);
        }
        let y = self.sample_target(j, x, rng)?;
        Ok(Some((j, y)))
    }

    fn invert_tabulated(&self, table: &HazardTable, w: &[(usize, f64)], t: f64, e: f64) -> Option<f64> {
        if w.is_empty() {
            return None;
        }
        let cum = |m: usize| -> f64 { w.iter().map(|&(i, c)| c * table.cum[i][m]).sum() };
        let m0 = self.cell(t);
        let (c0, c1) = (cum(m0), cum(m0 + 1));
        let at_t = c0 + (c1 - c0) * (t - self.node(m0)) / self.h;
        let target = at_t + e;
        if cum(self.nodes) < target {
            return None;
        }
        // first node with cum >= target
        let (mut lo, mut hi) = (m0 + 1, self.nodes);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if cum(mid) < target {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let (a, b) = if lo == m0 + 1 { (at_t, c1) } else { (cum(lo - 1), cum(lo)) };
        let left = if lo == m0 + 1 { t } else { self.node(lo - 1) };
        let right = self.node(lo);
        Some(left + (right - left) * (target - a) / (b - a))
    }

    fn invert_stepping(&self, t: f64, x: &State, e: f64) -> Result<Option<f64>> {
        let mut acc = 0.0;
        let mut left = t;
        let mut rate_left = total_rate(self.kernel, t, x)?;
        for m in self.cell(t) + 1..=self.nodes {
            let right = self.node(m);
            if right <= left {
                continue;
            }
            let rate_right = total_rate(self.kernel, right, x)?;
            let inc = 0.5 * (rate_left + rate_right) * (right - left);
            if acc + inc >= e && inc > 0.0 {
                return Ok(Some(left + (right - left) * (e - acc) / inc));
            }
            acc += inc;
            left = right;
            rate_left = rate_right;
        }
        Ok(None)
    }

    /// Draws `Y ~ q_J(x, ·) / λ_J(x)`: an atom or the continuous part in
    /// proportion to mass, then a node of the continuous law.
    pub fn sample_target<R: Rng>(&self, j: f64, x: &State, rng: &mut R) -> Result<State> {
        let atoms = self.kernel.atoms(j, x);
        let cont = self.kernel.continuous_part(j, x);
        let cont_mass = cont.as_ref().map_or(0.0, |c| c.total_mass);
        let total: f64 = atoms.iter().map(|a| a.rate).sum::<f64>() + cont_mass;
        if !total.is_finite() {
            return Err(Error::NonFinite { t: j, state: x.to_string() });
        }
        if total <= 0.0 {
            return Err(Error::Invalid(format!("jump from {x} at t = {j} where the intensity is zero")));
        }
        let mut u = rng.random::<f64>() * total;
        for a in &atoms {
            if u < a.rate {
                return Ok(a.target);
            }
            u -= a.rate;
        }
        match cont {
            Some(c) if c.total_mass > 0.0 => {
                let node = c.law.select(rng.random::<f64>());
                Ok(c.family.state(c.law.nodes()[node].0))
            }
            // rounding left u just past the last atom
            _ => Ok(atoms.iter().rev().find(|a| a.rate > 0.0).expect("positive total").target),
        }
    }

    fn run_path<R: Rng>(&self, x0: &State, t0: f64, rng: &mut R, record: bool) -> Result<PathSample> {
        self.check_time(t0)?;
        let mut path = PathSample { jump_times: Vec::new(), states: Vec::new(), pv: 0.0 };
        if record {
            path.states.push(*x0);
        }
        let (mut t, mut x) = (t0, *x0);
        let mut pv = 0.0;
        loop {
            let next = self.sample_next_jump(t, &x, rng)?;
            let seg_end = next.map_or(self.end, |(j, _)| j);
            pv += self.payments.sojourn_pv(&x, t, seg_end, t0, self.discount);
            let Some((j, y)) = next else {
                break;
            };
            pv += self.discount.factor(t0, j) * self.payments.transition(j, &x, &y);
            if record {
                path.jump_times.push(j);
                path.states.push(y);
            }
            t = j;
            x = y;
        }
        let at_end: f64 = self
            .payments
            .lumps
            .iter()
            .filter(|l| l.state == x.label() && (l.time - self.end).abs() <= 1e-9 * self.end.abs().max(1.0))
            .map(|l| l.amount)
            .sum::<f64>()
            + self.terminal.iter().filter(|(s, _)| *s == x).map(|(_, v)| v).sum::<f64>();
        if at_end != 0.0 {
            pv += self.discount.factor(t0, self.end) * at_end;
        }
        path.pv = pv;
        Ok(path)
    }

    /// Full trajectory of path `index` under `seed`; the same draws as
    /// [`simulate_pv`] uses for that path.
    pub fn sample_path(&self, x0: &State, t0: f64, seed: u64, index: u64) -> Result<PathSample> {
        self.run_path(x0, t0, &mut path_rng(seed, index), true)
    }

    pub fn sample_paths(&self, x0: &State, t0: f64, n_paths: usize, seed: u64) -> Result<Vec<PathSample>> {
        (0..n_paths as u64).into_par_iter().map(|i| self.sample_path(x0, t0, seed, i)).collect()
    }
}

/// The RNG of path `index`: stream `index` of the ChaCha8 generator keyed by `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mean present value at `t0` of the payment stream from `x0`.
pub fn simulate_pv<K: IntensityKernel + ?Sized>(
    sim: &Simulator<'_, K>,
    x0: &State,
    t0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_paths == 0 {
        return Err(Error::Invalid("n_paths must be at least 1".into()));
    }
    let pvs: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| sim.run_path(x0, t0, &mut path_rng(seed, i), false).map(|p| p.pv))
        .collect::<Result<_>>()?;
    Ok(estimate(&pvs, seed))
}

fn estimate(pvs: &[f64], seed: u64) -> McEstimate {
    let n = pvs.len() as f64;
    let mean = pairwise_sum(pvs) / n;
    let std_error = if pvs.len() > 1 {
        let sq: Vec<f64> = pvs.iter().map(|x| (x - mean) * (x - mean)).collect();
        (pairwise_sum(&sq) / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    McEstimate { mean, std_error, n_paths: pvs.len() as u64, seed }
}

/// Summation in a fixed binary tree, independent of thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// One row per visited state: `path,index,time,state,pv`, where `time` is
/// the entry time (the start time for `index = 0`).
pub fn write_paths_csv<W: Write>(paths: &[PathSample], t0: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path", "index", "time", "state", "pv"])?;
    for (p, path) in paths.iter().enumerate() {
        for (i, s) in path.states.iter().enumerate() {
            let time = if i == 0 { t0 } else { path.jump_times[i - 1] };
            w.write_record([p.to_string(), i.to_string(), fmt_f64(time), s.to_string(), fmt_f64(path.pv)])?;
        }
    }
    w.flush()?;
    Ok(())
}

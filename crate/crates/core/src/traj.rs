//! Quantum-jump unraveling with deterministic seed-split ensembles.
//!
//! Jump timing uses the waiting-time method: the state evolves under the
//! non-Hermitian drift until its squared norm crosses a uniform random
//! threshold, the crossing time is refined inside the step, and a channel is
//! drawn with probability proportional to rate * ||c psi||^2.
//!
//! The displaced-frame mode-feedback model carries a classical filter f(t)
//! that kicks by +1 at system detections and decays exponentially in
//! between. Its Hamiltonian piece is diagonal, so instead of resolving the
//! filter scale with tiny steps, the integrator works in the frame rotated
//! by the exact integrated filter phase: drift entries are bucketed by their
//! diagonal-difference class and each class picks up a closed-form phase at
//! every integration stage.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::TimeDependentModel;
use crate::operator::Operator;
use crate::space::{FactorKind, SpaceSpec};
use crate::sparse::CsrMat;
use crate::state::DensityMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Any Fock-factor top level holding more population than this at a sample
/// flags the trajectory as truncation-unhealthy.
const HEALTH_TOL: f64 = 1e-4;

/// Squared-norm floor below which the integration has underflowed.
const NORM_FLOOR: f64 = 1e-240;

struct UnravelChannel {
    op: CsrMat,
    rate: f64,
    increments_filter: bool,
}

/// A generator prepared for jump unraveling: non-Hermitian drift split into
/// filter-phase classes, the jump channels, and the filter dynamics.
pub struct UnravelSpec {
    space: SpaceSpec,
    /// (diagonal difference, entries of that class); the zero class first.
    classes: Vec<(f64, CsrMat)>,
    /// Filter Hamiltonian diagonal g_i; empty when there is no filter.
    filter_diag: Vec<f64>,
    /// Filter decay rate (half the ancilla damping rate for the
    /// mode-feedback loop); 0 marks a static generator.
    filter_decay: f64,
    channels: Vec<UnravelChannel>,
    /// Row-sum norm of the drift, for the step bound.
    drift_norm: f64,
    /// Largest |diagonal difference|; f * max_delta is the fastest class
    /// rotation rate.
    max_delta: f64,
}

impl UnravelSpec {
    /// Static generator: Hamiltonian plus `(jump operator, rate)` channels.
    pub fn from_static(h: &Operator, channels: &[(Operator, f64)]) -> Result<Self> {
        let with_flags: Vec<(Operator, f64, bool)> =
            channels.iter().map(|(op, rate)| (op.clone(), *rate, false)).collect();
        Self::assemble(h, None, 0.0, with_flags)
    }

    /// The displaced-frame mode-feedback model. Channel rates are 1 because
    /// the builder folds them into the operators.
    pub fn from_time_dependent(model: &TimeDependentModel) -> Result<Self> {
        if model.filter_decay <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "filter decay {} must be positive",
                model.filter_decay
            )));
        }
        let n_incrementing =
            model.channels.iter().filter(|ch| ch.increments_filter).count();
        if n_incrementing != 1 {
            return Err(Error::InvalidParam(format!(
                "exactly one channel may increment the filter, found {n_incrementing}"
            )));
        }
        let diag = model.h_filter.diagonal_if(1e-12).ok_or_else(|| {
            Error::InvalidParam("filter Hamiltonian piece must be diagonal".into())
        })?;
        let scale = diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut gdiag = Vec::with_capacity(diag.len());
        for z in &diag {
            if z.im.abs() > 1e-12 * (1.0 + scale) {
                return Err(Error::InvalidParam(
                    "filter Hamiltonian diagonal must be real".into(),
                ));
            }
            gdiag.push(z.re);
        }
        let channels: Vec<(Operator, f64, bool)> = model
            .channels
            .iter()
            .map(|ch| (ch.op.clone(), 1.0, ch.increments_filter))
            .collect();
        Self::assemble(&model.h_static, Some(gdiag), model.filter_decay, channels)
    }

    fn assemble(
        h: &Operator,
        filter_diag: Option<Vec<f64>>,
        filter_decay: f64,
        channels_in: Vec<(Operator, f64, bool)>,
    ) -> Result<Self> {
        h.check_hermitian(1e-8)?;
        let space = h.space().clone();
        let d = space.total_dim();

        let mut drift = h.data().mapv(|z| -Complex64::i() * z);
        let mut channels = Vec::with_capacity(channels_in.len());
        for (op, rate, increments) in channels_in {
            space.same_space(op.space())?;
            if rate <= 0.0 {
                return Err(Error::InvalidParam(format!(
                    "jump rate {rate} must be positive"
                )));
            }
            if increments && filter_diag.is_none() {
                return Err(Error::InvalidParam(
                    "a channel increments the filter but the model has none".into(),
                ));
            }
            let cdag = op.data().t().mapv(|z| z.conj());
            let cdagc = cdag.dot(op.data());
            let half = Complex64::new(0.5 * rate, 0.0);
            drift = drift - cdagc.mapv(|z| half * z);
            channels.push(UnravelChannel {
                op: CsrMat::from_dense(op.data(), 0.0),
                rate,
                increments_filter: increments,
            });
        }

        let gdiag = filter_diag.unwrap_or_default();
        if !gdiag.is_empty() && gdiag.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "filter diagonal has {} entries on a dimension-{d} space",
                gdiag.len()
            )));
        }

        let drift_norm = (0..d)
            .map(|i| (0..d).map(|j| drift[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max);

        // Bucket drift entries by g_i - g_j. The buckets carry exact filter
        // phases during integration; entries closer than a relative sliver
        // share a bucket.
        let gspan = if gdiag.is_empty() {
            0.0
        } else {
            let lo = gdiag.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = gdiag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        };
        let atol = 1e-9 * gspan;
        let mut reps: Vec<f64> = vec![0.0];
        let mut members: Vec<Array2<Complex64>> = vec![Array2::zeros((d, d))];
        for i in 0..d {
            for j in 0..d {
                let v = drift[(i, j)];
                if v == ZERO {
                    continue;
                }
                let delta = if gdiag.is_empty() { 0.0 } else { gdiag[i] - gdiag[j] };
                let slot = reps
                    .iter()
                    .position(|&rep| (rep - delta).abs() <= atol)
                    .unwrap_or_else(|| {
                        reps.push(delta);
                        members.push(Array2::zeros((d, d)));
                        reps.len() - 1
                    });
                members[slot][(i, j)] = v;
            }
        }
        let classes: Vec<(f64, CsrMat)> = reps
            .iter()
            .zip(&members)
            .filter(|(rep, m)| **rep == 0.0 || m.iter().any(|z| *z != ZERO))
            .map(|(rep, m)| (*rep, CsrMat::from_dense(m, 0.0)))
            .collect();
        let max_delta = classes.iter().map(|(rep, _)| rep.abs()).fold(0.0, f64::max);

        Ok(UnravelSpec {
            space,
            classes,
            filter_diag: gdiag,
            filter_decay,
            channels,
            drift_norm,
            max_delta,
        })
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    fn has_filter(&self) -> bool {
        self.filter_decay > 0.0
    }

    fn f_at(&self, f_seg: f64, tau: f64) -> f64 {
        if !self.has_filter() {
            return 0.0;
        }
        f_seg * (-self.filter_decay * tau).exp()
    }

    /// Integrated filter phase over [0, tau] of a segment starting at f_seg.
    fn theta(&self, f_seg: f64, tau: f64) -> f64 {
        if !self.has_filter() || f_seg == 0.0 {
            return 0.0;
        }
        f_seg * (1.0 - (-self.filter_decay * tau).exp()) / self.filter_decay
    }

    /// Step bound: a fixed cap plus a tenth of the inverse drift norm,
    /// extended by the fastest class rotation at the current filter value.
    /// The drive phases themselves are applied exactly, so the filter decay
    /// rate only matters through |f| max_delta.
    fn step_size(&self, f_now: f64) -> f64 {
        let mut h = 0.02f64;
        let denom = self.drift_norm + f_now.abs() * self.max_delta;
        if denom > 0.0 {
            h = h.min(0.1 / denom);
        }
        h
    }
}

/// One trajectory: the jump log, filter samples, and end state.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// (time, channel index), strictly increasing in time.
    pub jumps: Vec<(f64, usize)>,
    /// Filter value at each requested sample time.
    pub f_samples: Vec<f64>,
    /// Squared norm of the unnormalized state at each sample (diagnostic;
    /// resets to 1 at jumps).
    pub norm_sq_samples: Vec<f64>,
    /// Normalized state at the last reached sample.
    pub final_state: Array1<Complex64>,
    /// Set when a truncation-health violation discarded the trajectory.
    pub discarded: Option<String>,
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// out = sum over classes of exp(i theta delta_c) (class_c phi).
fn class_deriv(classes: &[(f64, CsrMat)], theta: f64, phi: &[Complex64], out: &mut [Complex64]) {
    out.fill(ZERO);
    for (delta, m) in classes {
        let coeff = if *delta == 0.0 || theta == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, theta * delta)
        };
        m.matvec_scaled_add(coeff, phi, out);
    }
}

/// Scratch buffers reused across every step of a trajectory.
struct Scratch {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    stage: Vec<Complex64>,
    jump_tmp: Vec<Complex64>,
    physical: Vec<Complex64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Scratch {
            k1: vec![ZERO; d],
            k2: vec![ZERO; d],
            k3: vec![ZERO; d],
            k4: vec![ZERO; d],
            stage: vec![ZERO; d],
            jump_tmp: vec![ZERO; d],
            physical: vec![ZERO; d],
        }
    }

    /// One RK4 step of size h from `phi` at segment offset tau0, into `out`.
    fn rk4(
        &mut self,
        spec: &UnravelSpec,
        phi: &[Complex64],
        f_seg: f64,
        tau0: f64,
        h: f64,
        out: &mut [Complex64],
    ) {
        let d = phi.len();
        let th0 = spec.theta(f_seg, tau0);
        let th_half = spec.theta(f_seg, tau0 + 0.5 * h);
        let th_full = spec.theta(f_seg, tau0 + h);

        class_deriv(&spec.classes, th0, phi, &mut self.k1);
        for i in 0..d {
            self.stage[i] = phi[i] + 0.5 * h * self.k1[i];
        }
        class_deriv(&spec.classes, th_half, &self.stage, &mut self.k2);
        for i in 0..d {
            self.stage[i] = phi[i] + 0.5 * h * self.k2[i];
        }
        class_deriv(&spec.classes, th_half, &self.stage, &mut self.k3);
        for i in 0..d {
            self.stage[i] = phi[i] + h * self.k3[i];
        }
        class_deriv(&spec.classes, th_full, &self.stage, &mut self.k4);
        let w = h / 6.0;
        for i in 0..d {
            out[i] = phi[i] + w * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }

    /// Physical state at segment offset tau: undo the class-phase frame.
    fn to_physical(&mut self, spec: &UnravelSpec, phi: &[Complex64], f_seg: f64, tau: f64) {
        let theta = spec.theta(f_seg, tau);
        if theta == 0.0 || spec.filter_diag.is_empty() {
            self.physical.copy_from_slice(phi);
            return;
        }
        for (i, p) in phi.iter().enumerate() {
            self.physical[i] = p * Complex64::from_polar(1.0, -theta * spec.filter_diag[i]);
        }
    }
}

/// Run the unraveling, handing each sample's normalized physical state to
/// `on_sample(sample_index, state)`.
fn run_engine<F>(
    spec: &UnravelSpec,
    psi0: &Array1<Complex64>,
    sample_times: &[f64],
    seed: u64,
    jumps_enabled: bool,
    mut on_sample: F,
) -> Result<TrajectoryRecord>
where
    F: FnMut(usize, &[Complex64]),
{
    let d = spec.space.total_dim();
    if psi0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {} on a dimension-{d} space",
            psi0.len()
        )));
    }
    let n0 = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if (n0 - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParam(format!(
            "initial state norm^2 deviates from 1 by {:.3e}",
            (n0 - 1.0).abs()
        )));
    }
    if sample_times.is_empty() {
        return Err(Error::InvalidParam("no sample times given".into()));
    }
    let mut prev = -1.0;
    for &ts in sample_times {
        if !ts.is_finite() || ts < 0.0 || ts <= prev {
            return Err(Error::InvalidParam(
                "sample times must be nonnegative and strictly increasing".into(),
            ));
        }
        prev = ts;
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let next_threshold = move |rng: &mut ChaCha12Rng| -> f64 {
        if !jumps_enabled {
            return -1.0;
        }
        loop {
            let r: f64 = rng.random();
            if r > 0.0 {
                return r;
            }
        }
    };

    let mut scratch = Scratch::new(d);
    let scale = 1.0 / n0.sqrt();
    let mut phi: Vec<Complex64> = psi0.iter().map(|z| z * scale).collect();
    let mut save = vec![ZERO; d];
    let mut trial = vec![ZERO; d];
    let mut best = vec![ZERO; d];
    let mut t = 0.0f64;
    let mut anchor = 0.0f64;
    let mut f_seg = 0.0f64;
    let mut r = next_threshold(&mut rng);

    let mut record = TrajectoryRecord {
        seed,
        jumps: Vec::new(),
        f_samples: Vec::with_capacity(sample_times.len()),
        norm_sq_samples: Vec::with_capacity(sample_times.len()),
        final_state: Array1::zeros(d),
        discarded: None,
    };

    'grid: for (si, &ts) in sample_times.iter().enumerate() {
        while ts - t > 1e-12 * (1.0 + ts) {
            let tau0 = t - anchor;
            let h = spec.step_size(spec.f_at(f_seg, tau0)).min(ts - t);
            save.copy_from_slice(&phi);
            scratch.rk4(spec, &save, f_seg, tau0, h, &mut trial);
            let n2 = norm2(&trial);
            if !n2.is_finite() {
                return Err(Error::Trajectory(format!(
                    "state became non-finite at t = {t:.6}"
                )));
            }

            if n2 >= r {
                phi.copy_from_slice(&trial);
                t += h;
                if n2 < NORM_FLOOR {
                    return Err(Error::Trajectory(format!(
                        "state norm underflowed at t = {t:.6}"
                    )));
                }
                continue;
            }

            // The threshold was crossed inside this step; bisect the step
            // size from the saved start state.
            let mut lo = 0.0f64;
            let mut hi = h;
            best.copy_from_slice(&trial);
            for _ in 0..40 {
                if hi - lo <= 1e-13 * h {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                scratch.rk4(spec, &save, f_seg, tau0, mid, &mut trial);
                if norm2(&trial) < r {
                    hi = mid;
                    best.copy_from_slice(&trial);
                } else {
                    lo = mid;
                }
            }
            let t_jump = t + hi;
            let tau_jump = t_jump - anchor;

            // Physical state at the jump, channel weights, selection.
            scratch.to_physical(spec, &best, f_seg, tau_jump);
            let mut total = 0.0f64;
            let mut weights = [0.0f64; 8];
            if spec.channels.len() > weights.len() {
                return Err(Error::InvalidParam(format!(
                    "{} jump channels exceed the supported 8",
                    spec.channels.len()
                )));
            }
            for (k, ch) in spec.channels.iter().enumerate() {
                ch.op.matvec(&scratch.physical, &mut scratch.jump_tmp);
                let w = ch.rate * norm2(&scratch.jump_tmp);
                weights[k] = w;
                total += w;
            }
            if !(total > 0.0) || !total.is_finite() {
                return Err(Error::Trajectory(format!(
                    "jump at t = {t_jump:.6} has total weight {total:.3e}"
                )));
            }
            let u: f64 = rng.random::<f64>() * total;
            let mut cum = 0.0f64;
            let mut chosen = spec.channels.len() - 1;
            for (k, w) in weights[..spec.channels.len()].iter().enumerate() {
                cum += w;
                if u < cum {
                    chosen = k;
                    break;
                }
            }
            let ch = &spec.channels[chosen];
            ch.op.matvec(&scratch.physical, &mut scratch.jump_tmp);
            let jn = norm2(&scratch.jump_tmp).sqrt();
            if jn <= 0.0 {
                return Err(Error::Trajectory(format!(
                    "selected channel {chosen} annihilates the state at t = {t_jump:.6}"
                )));
            }
            for (p, s) in phi.iter_mut().zip(&scratch.jump_tmp) {
                *p = s / jn;
            }
            f_seg = spec.f_at(f_seg, tau_jump) + if ch.increments_filter { 1.0 } else { 0.0 };
            anchor = t_jump;
            t = t_jump;
            record.jumps.push((t_jump, chosen));
            r = next_threshold(&mut rng);
        }
        t = ts;

        let tau = ts - anchor;
        let f_now = spec.f_at(f_seg, tau);
        let n2 = norm2(&phi);
        scratch.to_physical(spec, &phi, f_seg, tau);
        let inv = 1.0 / n2.sqrt();
        for z in scratch.physical.iter_mut() {
            *z *= inv;
        }

        for (fi, factor) in spec.space.factors().iter().enumerate() {
            if factor.kind != FactorKind::Fock {
                continue;
            }
            let top = factor.dim - 1;
            let pop: f64 = scratch
                .physical
                .iter()
                .enumerate()
                .filter(|(idx, _)| spec.space.occupation(*idx, fi) == top)
                .map(|(_, z)| z.norm_sqr())
                .sum();
            if pop > HEALTH_TOL {
                record.discarded = Some(format!(
                    "factor {fi} top-level occupation {pop:.3e} at t = {ts}"
                ));
                record.f_samples.push(f_now);
                record.norm_sq_samples.push(n2);
                record.final_state = Array1::from_vec(scratch.physical.clone());
                break 'grid;
            }
        }

        record.f_samples.push(f_now);
        record.norm_sq_samples.push(n2);
        on_sample(si, &scratch.physical);
        if si + 1 == sample_times.len() {
            record.final_state = Array1::from_vec(scratch.physical.clone());
        }
    }

    Ok(record)
}

/// Single unraveled trajectory sampled at `sample_times` (the last entry is
/// the final time).
pub fn simulate_trajectory(
    spec: &UnravelSpec,
    psi0: &Array1<Complex64>,
    sample_times: &[f64],
    seed: u64,
) -> Result<TrajectoryRecord> {
    run_engine(spec, psi0, sample_times, seed, true, |_, _| {})
}

/// Deterministic (no-jump) evolution under the drift alone: squared norms at
/// the sample times and the final normalized state. The norm sequence is
/// non-increasing.
pub fn no_jump_evolution(
    spec: &UnravelSpec,
    psi0: &Array1<Complex64>,
    sample_times: &[f64],
) -> Result<(Vec<f64>, Array1<Complex64>)> {
    let record = run_engine(spec, psi0, sample_times, 0, false, |_, _| {})?;
    if let Some(reason) = record.discarded {
        return Err(Error::TruncationHealth(reason));
    }
    Ok((record.norm_sq_samples, record.final_state))
}

/// Ensemble mean over trajectories at each sample time, with per-entry and
/// per-observable standard errors.
pub struct EnsembleEstimate {
    pub sample_times: Vec<f64>,
    /// Mean density matrix at each sample (kept trajectories only).
    pub mean_states: Vec<DensityMatrix>,
    /// Entrywise standard error of each mean state.
    pub state_ses: Vec<Array2<f64>>,
    /// (n_samples, n_observables) means of Re<psi|O|psi>.
    pub observable_means: Array2<f64>,
    pub observable_ses: Array2<f64>,
    pub n_traj: usize,
    pub n_discarded: usize,
}

impl EnsembleEstimate {
    pub fn n_kept(&self) -> usize {
        self.n_traj - self.n_discarded
    }

    /// Mean state at the last sample time.
    pub fn final_state(&self) -> &DensityMatrix {
        self.mean_states.last().expect("estimate holds at least one sample")
    }
}

/// Per-trajectory seeds: the splitmix64 output stream seeded at the master
/// seed, so the i-th trajectory's seed never depends on worker layout.
fn trajectory_seed(master: u64, index: usize) -> u64 {
    let mut z = master
        .wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trajectories are reduced over fixed index chunks in index order, so the
/// result never depends on how workers split the range.
const CHUNK: usize = 64;

struct ChunkAccum {
    dm: Vec<Array2<Complex64>>,
    dm_sq: Vec<Array2<f64>>,
    obs_sum: Array2<f64>,
    obs_sq: Array2<f64>,
    kept: usize,
    discarded: usize,
    first_discard: Option<String>,
}

/// Average `n_traj` trajectories of `spec` from `psi0`, sampling states and
/// observables at `sample_times`. The result is bit-identical for a fixed
/// `(master_seed, n_traj)` whatever `workers` is.
pub fn ensemble_average(
    spec: &UnravelSpec,
    psi0: &Array1<Complex64>,
    sample_times: &[f64],
    n_traj: usize,
    master_seed: u64,
    workers: usize,
    observables: &[Operator],
) -> Result<EnsembleEstimate> {
    if n_traj == 0 {
        return Err(Error::InvalidParam("n_traj must be at least 1".into()));
    }
    for op in observables {
        spec.space.same_space(op.space())?;
    }
    let obs_csr: Vec<CsrMat> =
        observables.iter().map(|op| CsrMat::from_dense(op.data(), 0.0)).collect();
    let d = spec.space.total_dim();
    let n_s = sample_times.len();
    let n_o = observables.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Trajectory(format!("worker pool: {e}")))?;

    let n_chunks = n_traj.div_ceil(CHUNK);
    let chunk_results: Vec<Result<ChunkAccum>> = pool.install(|| {
        (0..n_chunks)
            .into_par_iter()
            .map(|ci| {
                let lo = ci * CHUNK;
                let hi = ((ci + 1) * CHUNK).min(n_traj);
                let mut acc = ChunkAccum {
                    dm: vec![Array2::zeros((d, d)); n_s],
                    dm_sq: vec![Array2::zeros((d, d)); n_s],
                    obs_sum: Array2::zeros((n_s, n_o)),
                    obs_sq: Array2::zeros((n_s, n_o)),
                    kept: 0,
                    discarded: 0,
                    first_discard: None,
                };
                let mut states = vec![vec![ZERO; d]; n_s];
                let mut tmp = vec![ZERO; d];
                for i in lo..hi {
                    let seed = trajectory_seed(master_seed, i);
                    let record =
                        run_engine(spec, psi0, sample_times, seed, true, |si, psi| {
                            states[si].copy_from_slice(psi);
                        })?;
                    if let Some(reason) = record.discarded {
                        acc.discarded += 1;
                        acc.first_discard.get_or_insert(reason);
                        continue;
                    }
                    acc.kept += 1;
                    for (si, psi) in states.iter().enumerate() {
                        let dm = &mut acc.dm[si];
                        let dm_sq = &mut acc.dm_sq[si];
                        for (a, pa) in psi.iter().enumerate() {
                            for (b, pb) in psi.iter().enumerate() {
                                let z = pa * pb.conj();
                                dm[(a, b)] += z;
                                dm_sq[(a, b)] += z.norm_sqr();
                            }
                        }
                        for (oi, op) in obs_csr.iter().enumerate() {
                            op.matvec(psi, &mut tmp);
                            let v: f64 = psi
                                .iter()
                                .zip(&tmp)
                                .map(|(p, q)| (p.conj() * q).re)
                                .sum();
                            acc.obs_sum[(si, oi)] += v;
                            acc.obs_sq[(si, oi)] += v * v;
                        }
                    }
                }
                Ok(acc)
            })
            .collect()
    });

    let mut dm: Vec<Array2<Complex64>> = vec![Array2::zeros((d, d)); n_s];
    let mut dm_sq: Vec<Array2<f64>> = vec![Array2::zeros((d, d)); n_s];
    let mut obs_sum: Array2<f64> = Array2::zeros((n_s, n_o));
    let mut obs_sq: Array2<f64> = Array2::zeros((n_s, n_o));
    let mut kept = 0usize;
    let mut discarded = 0usize;
    let mut first_discard: Option<String> = None;
    for res in chunk_results {
        let acc = res?;
        for si in 0..n_s {
            dm[si] += &acc.dm[si];
            dm_sq[si] += &acc.dm_sq[si];
        }
        obs_sum += &acc.obs_sum;
        obs_sq += &acc.obs_sq;
        kept += acc.kept;
        discarded += acc.discarded;
        if first_discard.is_none() {
            first_discard = acc.first_discard;
        }
    }

    if (discarded as f64) > 0.01 * (n_traj as f64) {
        let reason = first_discard.unwrap_or_else(|| "unknown".into());
        return Err(Error::TruncationHealth(format!(
            "{discarded} of {n_traj} trajectories discarded (first: {reason})"
        )));
    }
    if kept == 0 {
        return Err(Error::Trajectory("every trajectory was discarded".into()));
    }

    let nk = kept as f64;
    let mut mean_states = Vec::with_capacity(n_s);
    let mut state_ses = Vec::with_capacity(n_s);
    for si in 0..n_s {
        let mean = dm[si].mapv(|z| z / nk);
        let mut se = Array2::zeros((d, d));
        if kept > 1 {
            for a in 0..d {
                for b in 0..d {
                    let var = (dm_sq[si][(a, b)] / nk - mean[(a, b)].norm_sqr()).max(0.0)
                        * nk
                        / (nk - 1.0);
                    se[(a, b)] = (var / nk).sqrt();
                }
            }
        }
        mean_states.push(DensityMatrix::new(spec.space.clone(), mean)?);
        state_ses.push(se);
    }
    let observable_means = obs_sum.mapv(|s| s / nk);
    let mut observable_ses = Array2::zeros((n_s, n_o));
    if kept > 1 {
        for si in 0..n_s {
            for oi in 0..n_o {
                let m = observable_means[(si, oi)];
                let var = (obs_sq[(si, oi)] / nk - m * m).max(0.0) * nk / (nk - 1.0);
                observable_ses[(si, oi)] = (var / nk).sqrt();
            }
        }
    }

    Ok(EnsembleEstimate {
        sample_times: sample_times.to_vec(),
        mean_states,
        state_ses,
        observable_means,
        observable_ses,
        n_traj,
        n_discarded: discarded,
    })
}

/// Late-time protocol for steady-state estimation from trajectories.
pub struct SteadyProtocol {
    pub t_final: f64,
    pub n_traj: usize,
    pub master_seed: u64,
    pub workers: usize,
}

/// Default late time for a relaxation-rate estimate: max(10, 20/gap).
pub fn default_steady_time(gap_estimate: f64) -> f64 {
    if gap_estimate <= 0.0 {
        return 10.0;
    }
    (20.0 / gap_estimate).max(10.0)
}

pub struct SteadyTrajEstimate {
    /// Samples at T/2 and T; the steady estimate is the T sample.
    pub estimate: EnsembleEstimate,
    /// Whether the T and T/2 estimates agree within 3 combined standard
    /// errors, entrywise and per observable.
    pub burn_in_ok: bool,
    /// Worst |difference| / (3 SE) ratio over entries and observables.
    pub burn_in_ratio: f64,
}

/// Ensemble steady-state estimate with the self-validating burn-in check:
/// the T and T/2 ensemble means must agree within statistical error.
pub fn steady_estimate(
    spec: &UnravelSpec,
    psi0: &Array1<Complex64>,
    protocol: &SteadyProtocol,
    observables: &[Operator],
) -> Result<SteadyTrajEstimate> {
    if protocol.t_final <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "steady-estimate time {} must be positive",
            protocol.t_final
        )));
    }
    let grid = [0.5 * protocol.t_final, protocol.t_final];
    let estimate = ensemble_average(
        spec,
        psi0,
        &grid,
        protocol.n_traj,
        protocol.master_seed,
        protocol.workers,
        observables,
    )?;

    let mut worst = 0.0f64;
    let d = spec.space.total_dim();
    let (half, full) = (&estimate.mean_states[0], &estimate.mean_states[1]);
    let (se_h, se_f) = (&estimate.state_ses[0], &estimate.state_ses[1]);
    for a in 0..d {
        for b in 0..d {
            let diff = (full.data()[(a, b)] - half.data()[(a, b)]).norm();
            let allow = 3.0 * (se_h[(a, b)] + se_f[(a, b)]) + 1e-12;
            worst = worst.max(diff / allow);
        }
    }
    for oi in 0..estimate.observable_means.ncols() {
        let diff =
            (estimate.observable_means[(1, oi)] - estimate.observable_means[(0, oi)]).abs();
        let allow =
            3.0 * (estimate.observable_ses[(1, oi)] + estimate.observable_ses[(0, oi)]) + 1e-12;
        worst = worst.max(diff / allow);
    }

    Ok(SteadyTrajEstimate {
        estimate,
        burn_in_ok: worst <= 1.0,
        burn_in_ratio: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock;
    use crate::models::{build_eo_mode_compound_transformed, AncillaParams, SystemParams};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn damping_spec(dim: usize) -> UnravelSpec {
        let space = SpaceSpec::fock(dim);
        let h = Operator::zeros(space.clone());
        let a = fock::annihilation(&space, 0).unwrap();
        UnravelSpec::from_static(&h, &[(a, 1.0)]).unwrap()
    }

    fn small_transformed() -> UnravelSpec {
        let sys = SystemParams::new(0.7, 0.3, 15).unwrap();
        let anc = AncillaParams::eo_mode_linked(2.0, 0.3, 0.05, 6).unwrap();
        let model = build_eo_mode_compound_transformed(&sys, &anc).unwrap();
        UnravelSpec::from_time_dependent(&model).unwrap()
    }

    #[test]
    fn damping_ensemble_matches_decay_law() {
        let spec = damping_spec(4);
        let psi0 = fock::fock_state(4, 2).unwrap();
        let number = fock::number(spec.space(), 0).unwrap();
        let times = [0.5, 1.0, 2.0];
        let est = ensemble_average(&spec, &psi0, &times, 1000, 42, 1, &[number]).unwrap();
        assert_eq!(est.n_discarded, 0);
        for (i, &t) in times.iter().enumerate() {
            let expected = 2.0 * (-t).exp();
            let got = est.observable_means[(i, 0)];
            let se = est.observable_ses[(i, 0)];
            assert!(
                (got - expected).abs() <= 3.0 * se,
                "t = {t}: <n> = {got} vs {expected}, se = {se}"
            );
        }
    }

    #[test]
    fn no_jump_coherent_state_stays_coherent() {
        let dim = 14;
        let spec = damping_spec(dim);
        let alpha = c(0.8, 0.0);
        let psi0 = fock::coherent_state(dim, alpha);
        let times = [0.25, 0.5, 1.0];
        let (norms, final_state) = no_jump_evolution(&spec, &psi0, &times).unwrap();
        let mut prev = 1.0;
        for &n2 in &norms {
            assert!(n2 <= prev + 1e-12, "no-jump norm increased: {n2} > {prev}");
            prev = n2;
        }
        let target = fock::coherent_state(dim, alpha * c((-0.5f64).exp(), 0.0));
        let overlap: Complex64 =
            target.iter().zip(final_state.iter()).map(|(a, b)| a.conj() * b).sum();
        assert!(
            (overlap.norm() - 1.0).abs() < 1e-7,
            "overlap with decayed coherent state: {}",
            overlap.norm()
        );
    }

    #[test]
    fn filter_samples_match_jump_log() {
        let spec = small_transformed();
        let psi0 = fock::basis_state(spec.space(), &[4, 0]).unwrap();
        let times: Vec<f64> = (1..=40).map(|k| 0.4 * k as f64).collect();
        let record = simulate_trajectory(&spec, &psi0, &times, 7).unwrap();
        assert!(record.discarded.is_none(), "{:?}", record.discarded);
        assert!(
            !record.jumps.is_empty(),
            "expected at least one jump; norms {:?}",
            record.norm_sq_samples
        );
        let mut prev = 0.0;
        for &(tj, _) in &record.jumps {
            assert!(tj > prev && tj <= *times.last().unwrap());
            prev = tj;
        }
        // f at each sample must reconstruct from the jump log alone.
        let decay = 1.0; // half the ancilla rate Gamma = 2
        for (i, &ts) in times.iter().enumerate() {
            let expect: f64 = record
                .jumps
                .iter()
                .filter(|(tj, ch)| *tj <= ts && spec.channels[*ch].increments_filter)
                .map(|(tj, _)| (-decay * (ts - tj)).exp())
                .sum();
            assert!(
                (record.f_samples[i] - expect).abs() < 1e-10,
                "f({ts}) = {} vs reconstruction {expect}",
                record.f_samples[i]
            );
        }
    }

    #[test]
    fn ensemble_deterministic_across_worker_counts() {
        let spec = small_transformed();
        let psi0 = fock::basis_state(spec.space(), &[0, 0]).unwrap();
        let number = fock::number(spec.space(), 0).unwrap();
        let times = [1.0, 2.0];
        let a = ensemble_average(&spec, &psi0, &times, 130, 9, 1, &[number.clone()]).unwrap();
        let b = ensemble_average(&spec, &psi0, &times, 130, 9, 8, &[number]).unwrap();
        assert_eq!(a.n_discarded, b.n_discarded);
        for si in 0..2 {
            assert_eq!(a.mean_states[si].data(), b.mean_states[si].data());
            assert_eq!(a.state_ses[si], b.state_ses[si]);
        }
        assert_eq!(a.observable_means, b.observable_means);
        assert_eq!(a.observable_ses, b.observable_ses);
    }

    #[test]
    fn ensemble_of_one_is_the_single_trajectory_projector() {
        let spec = damping_spec(6);
        let psi0 = fock::fock_state(6, 3).unwrap();
        let times = [0.7];
        let est = ensemble_average(&spec, &psi0, &times, 1, 5, 1, &[]).unwrap();
        let seed = trajectory_seed(5, 0);
        let record = simulate_trajectory(&spec, &psi0, &times, seed).unwrap();
        let psi = &record.final_state;
        for a in 0..6 {
            for b in 0..6 {
                let outer = psi[a] * psi[b].conj();
                assert!((est.mean_states[0].data()[(a, b)] - outer).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn static_ensemble_matches_exponential_propagation() {
        use crate::models::build_no_feedback;
        use crate::superop::{unvec_density, vec_density};

        let sys = SystemParams::new(0.6, 0.0, 11).unwrap();
        let space = sys.space();
        let d = space.total_dim();
        let l = build_no_feedback(&sys).unwrap();

        let h = crate::models::parametric_hamiltonian(&space, 0, sys.lambda).unwrap();
        let a = fock::annihilation(&space, 0).unwrap();
        let spec = UnravelSpec::from_static(&h, &[(a, 1.0)]).unwrap();

        let psi0 = fock::fock_state(d, 0).unwrap();
        let t = 1.5;
        let est = ensemble_average(&spec, &psi0, &[t], 400, 11, 1, &[]).unwrap();

        let rho0 = DensityMatrix::from_pure(space.clone(), &psi0).unwrap();
        let prop = crate::linalg::expm(&l.to_dense().mapv(|z| z * c(t, 0.0))).unwrap();
        let evolved = prop.dot(&Array1::from_vec(vec_density(rho0.data())));
        let oracle = unvec_density(evolved.as_slice().unwrap(), d);

        let mean = est.mean_states[0].data();
        for i in 0..d {
            for j in 0..d {
                let diff = (mean[(i, j)] - oracle[(i, j)]).norm();
                let allow = 3.0 * est.state_ses[0][(i, j)] + 1e-9;
                assert!(
                    diff <= allow,
                    "entry ({i},{j}): diff {diff:.3e} exceeds {allow:.3e}"
                );
            }
        }
    }

    #[test]
    fn steady_estimate_of_damped_cavity_reaches_vacuum() {
        let spec = damping_spec(3);
        let psi0 = fock::fock_state(3, 1).unwrap();
        let protocol = SteadyProtocol {
            t_final: default_steady_time(1.0),
            n_traj: 400,
            master_seed: 3,
            workers: 1,
        };
        let number = fock::number(spec.space(), 0).unwrap();
        let out = steady_estimate(&spec, &psi0, &protocol, &[number]).unwrap();
        assert!(out.burn_in_ok, "burn-in ratio {}", out.burn_in_ratio);
        let vac_pop = out.estimate.final_state().data()[(0, 0)].re;
        assert!(vac_pop > 0.999, "vacuum population {vac_pop}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = damping_spec(4);
        let psi0 = fock::fock_state(4, 1).unwrap();
        assert!(simulate_trajectory(&spec, &psi0, &[], 0).is_err());
        assert!(simulate_trajectory(&spec, &psi0, &[1.0, 0.5], 0).is_err());
        let unnorm = psi0.mapv(|z| z * c(1.1, 0.0));
        assert!(simulate_trajectory(&spec, &unnorm, &[1.0], 0).is_err());
        let space = SpaceSpec::fock(4);
        let h = Operator::zeros(space.clone());
        let a = fock::annihilation(&space, 0).unwrap();
        assert!(UnravelSpec::from_static(&h, &[(a, 0.0)]).is_err());
    }

    #[test]
    fn truncated_initial_state_is_discarded_and_counted() {
        let spec = damping_spec(3);
        let psi0 = fock::fock_state(3, 2).unwrap();
        let record = simulate_trajectory(&spec, &psi0, &[0.0, 1.0], 0).unwrap();
        assert!(record.discarded.is_some());
        let err = ensemble_average(&spec, &psi0, &[0.0, 1.0], 10, 0, 1, &[]);
        assert!(matches!(err, Err(Error::TruncationHealth(_))));
    }
}

//! Invariant suite. Each entry measures a residual against a fixed
//! tolerance; the dense references here are the library's own dense paths.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riemannlora::init::{backprop_rsvd, loi_from_svd, loi_split, RsvdConfig};
use riemannlora::linalg::{probe, qr_thin, skeleton_svd, svd_trunc, DenseMatrix};
use riemannlora::manifold::{
    canonicalize, dense_projection, project_to_tangent, random_point, random_tangent, retract, tangent_inner,
    vector_transport, Embed, FramedPoint, SkeletonPair,
};
use riemannlora::optimizers::{riemann_step, OptimizerState, RiemannHyper};
use riemannlora::oracle::{
    make_linreg_oracle, make_mlp_oracle, make_quadratic_oracle, random_labeled_batch, riemannian_grad,
    CountingOracle, EffectiveWeights, GradientOracle, MlpArch, WeightsView,
};

use crate::config::{ExperimentConfig, InitChoice, OptimizerKind, TaskKind};
use crate::error::Result;
use crate::run::{run_experiment, write_csv, Session};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Quick,
    Full,
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quick" => Ok(Profile::Quick),
            "full" => Ok(Profile::Full),
            _ => Err(format!("unknown profile {s:?}, expected quick or full")),
        }
    }
}

impl Profile {
    fn trials(self) -> usize {
        match self {
            Profile::Quick => 10,
            Profile::Full => 100,
        }
    }

    fn max_dim(self) -> usize {
        match self {
            Profile::Quick => 16,
            Profile::Full => 64,
        }
    }

    fn max_rank(self) -> usize {
        match self {
            Profile::Quick => 3,
            Profile::Full => 8,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CheckOptions {
    /// Negative control: perturb the orthonormal factor before measuring it.
    pub corrupt_frame: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantResult {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
}

impl InvariantResult {
    pub fn pass(&self) -> bool {
        self.residual <= self.tolerance
    }
}

#[derive(Default)]
struct Suite {
    results: Vec<InvariantResult>,
}

impl Suite {
    fn push(&mut self, name: &'static str, residual: f64, tolerance: f64) {
        // NaN residuals fail.
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        self.results.push(InvariantResult {
            name,
            residual,
            tolerance,
        });
    }
}

fn rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

struct Dims {
    m: usize,
    n: usize,
    r: usize,
}

fn dims(rng: &mut ChaCha8Rng, profile: Profile) -> Dims {
    let m = rng.random_range(2..=profile.max_dim());
    let n = rng.random_range(2..=profile.max_dim());
    let r = rng.random_range(1..=profile.max_rank().min(m).min(n));
    Dims { m, n, r }
}

fn linalg_checks(s: &mut Suite, rng: &mut ChaCha8Rng, p: Profile) -> Result<()> {
    let (mut qr_rec, mut qr_orth, mut tail, mut skel) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut determinism = 0.0;
    for _ in 0..p.trials() {
        let d = dims(rng, p);
        let (rows, cols) = (d.m.max(d.n), d.m.min(d.n));
        let m = DenseMatrix::random_normal(rows, cols, rng);
        let (q, r) = qr_thin(&m)?;
        qr_rec = qr_rec.max(rel(&q.matmul(&r)?, &m));
        qr_orth = qr_orth.max(q.orthonormality_defect());

        let a = DenseMatrix::random_normal(d.m, d.n, rng);
        let full = svd_trunc(&a, d.m.min(d.n))?;
        let k = d.r;
        let t = svd_trunc(&a, k)?;
        let want: f64 = full.sigma[k..].iter().map(|x| x * x).sum();
        let got = (&a - &t.to_dense()).frobenius_norm_sq();
        tail = tail.max((got - want).abs() / want.max(1e-16 * a.frobenius_norm_sq()));
        let again = svd_trunc(&a, k)?;
        if again.u.to_row_major() != t.u.to_row_major()
            || again.v.to_row_major() != t.v.to_row_major()
            || again.sigma != t.sigma
        {
            determinism = 1.0;
        }

        let width = (2 * d.r).min(d.m).min(d.n);
        let pp = DenseMatrix::random_normal(d.m, width, rng);
        let qq = DenseMatrix::random_normal(d.n, width, rng);
        let sk = skeleton_svd(&pp, &qq, d.r.min(width))?;
        let dense = svd_trunc(&pp.matmul_t(&qq)?, d.r.min(width))?;
        skel = skel.max(rel(&sk.to_dense(), &dense.to_dense()));
    }
    s.push("qr_reconstruction", qr_rec, 1e-12);
    s.push("qr_orthonormality", qr_orth, 1e-12);
    s.push("svd_tail_energy", tail, 1e-9);
    s.push("svd_determinism", determinism, 0.0);
    s.push("skeleton_svd_vs_dense", skel, 1e-10);
    Ok(())
}

fn loglog_slope(ts: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    num / den
}

/// Worst deviation of the retraction error slope from 2 over `trials` points.
pub fn retraction_slope_defect(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64> {
    let ts = [1e-2, 5e-3, 2.5e-3];
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let at = random_point(10, 8, 3, rng)?;
        let xi = random_tangent(&at, rng);
        let xi = xi.scale(1.0 / xi.norm());
        let x = at.point.to_dense();
        let mut errs = Vec::new();
        for &t in &ts {
            let moved = retract(&at, &xi, -t)?.to_dense();
            errs.push((&moved - &(&x + &xi.to_dense().scale(t))).frobenius_norm());
        }
        worst = worst.max((loglog_slope(&ts, &errs) - 2.0).abs());
    }
    Ok(worst)
}

fn manifold_checks(s: &mut Suite, rng: &mut ChaCha8Rng, p: Profile, opts: CheckOptions) -> Result<()> {
    let mut w = [0.0f64; 10];
    for _ in 0..p.trials() {
        let d = dims(rng, p);
        let at = random_point(d.m, d.n, d.r, rng)?;
        let mut a_l = at.point.a_l().clone();
        if opts.corrupt_frame {
            a_l = a_l.scale(1.01);
        }
        w[0] = w[0].max(a_l.orthonormality_defect() / (d.r as f64).sqrt());

        let z = DenseMatrix::random_normal(d.m, d.n, rng);
        let pz = project_to_tangent(&z, &at)?.to_dense();
        w[1] = w[1].max(rel(&pz, &dense_projection(&z, &at.frame)?));
        w[2] = w[2].max(rel(&project_to_tangent(&pz, &at)?.to_dense(), &pz));
        let xi = random_tangent(&at, rng);
        let resid = &z - &pz;
        w[3] = w[3].max(resid.frobenius_dot(&xi.to_dense())?.abs() / (z.frobenius_norm() * xi.norm()));
        let zz = z.frobenius_norm_sq();
        w[4] = w[4].max((zz - resid.frobenius_norm_sq() - pz.frobenius_norm_sq()).abs() / zz);
        let k = (2 * d.r).min(d.m.min(d.n));
        let best = (&z - &svd_trunc(&z, k)?.to_dense()).frobenius_norm();
        w[5] = w[5].max((best - resid.frobenius_norm()) / z.frobenius_norm());

        let moved = retract(&at, &xi, 0.3)?.to_dense();
        let target = &at.point.to_dense() - &xi.to_dense().scale(0.3);
        w[6] = w[6].max(rel(&moved, &svd_trunc(&target, d.r)?.to_dense()));

        let width = 2 * d.r;
        let skel = SkeletonPair::new(
            DenseMatrix::random_normal(d.m, width, rng),
            DenseMatrix::random_normal(d.n, width, rng),
        )?;
        let tv = vector_transport(&skel, &at.frame)?.to_dense();
        w[7] = w[7].max(rel(&tv, &project_to_tangent(&skel.to_dense(), &at)?.to_dense()));

        let y = random_tangent(&at, rng);
        let dense_dot = xi.to_dense().frobenius_dot(&y.to_dense())?;
        w[8] = w[8].max((tangent_inner(&xi, &y)? - dense_dot).abs() / (xi.norm() * y.norm()));

        let again = canonicalize(at.point.a_l(), at.point.b())?;
        w[9] = w[9].max(rel(&again.point.to_dense(), &at.point.to_dense()));
    }
    s.push("point_orthonormality", w[0], 1e-10);
    s.push("projection_vs_dense", w[1], 1e-10);
    s.push("projection_idempotence", w[2], 1e-10);
    s.push("projection_residual_orthogonality", w[3], 1e-9);
    s.push("pythagorean_identity", w[4], 1e-9);
    s.push("eckart_young_lower_bound", w[5].max(0.0), 1e-9);
    s.push("retraction_vs_dense", w[6], 1e-10);
    s.push("transport_vs_projection", w[7], 1e-10);
    s.push("tangent_inner_vs_dense", w[8], 1e-12);
    s.push("canonicalize_fixed_point", w[9], 1e-10);
    s.push("retraction_second_order", retraction_slope_defect(rng, 5)?, 0.1);
    Ok(())
}

fn oracle_zoo(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Result<Vec<Box<dyn GradientOracle>>> {
    let t = DenseMatrix::random_normal(m, n, rng);
    let d = DenseMatrix::random_normal(16, m, rng);
    let o = DenseMatrix::random_normal(16, n, rng);
    let batch = random_labeled_batch(12, m, 3, rng);
    let seed = rng.random();
    Ok(vec![
        Box::new(make_quadratic_oracle(t)?),
        Box::new(make_linreg_oracle(d, o)?),
        Box::new(make_mlp_oracle(n, MlpArch { hidden: 4, classes: 3 }, batch, seed)?),
    ])
}

fn framed(rng: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> Result<(DenseMatrix, FramedPoint)> {
    let base = DenseMatrix::random_normal(m, n, rng).scale(0.3);
    let at = canonicalize(
        &DenseMatrix::random_normal(m, r, rng),
        &DenseMatrix::random_normal(n, r, rng).scale(0.3),
    )?;
    Ok((base, at))
}

fn gradient_checks(s: &mut Suite, rng: &mut ChaCha8Rng, p: Profile) -> Result<()> {
    let (m, n, r) = (9, 7, 2);
    let mut w = [0.0f64; 5];
    for _ in 0..p.trials().min(20) {
        let (base, at) = framed(rng, m, n, r)?;
        for o in oracle_zoo(rng, m, n)? {
            let y = WeightsView::factored(&base, at.point.a_l(), at.point.b());
            let g = o.dense_grad(y)?;
            for width in 1..=3 {
                let mm = DenseMatrix::random_normal(n, width, rng);
                let nn = DenseMatrix::random_normal(m, width, rng);
                let scale_r = g.frobenius_norm() * mm.frobenius_norm();
                let scale_l = g.frobenius_norm() * nn.frobenius_norm();
                w[0] = w[0].max((&o.gvp_right(y, &mm)? - &g.matmul(&mm)?).frobenius_norm() / scale_r);
                w[0] = w[0].max((&o.gvp_left(y, &nn)? - &g.t_matmul(&nn)?).frobenius_norm() / scale_l);
            }
            let rg = riemannian_grad(o.as_ref(), &base, &at)?;
            w[1] = w[1].max(rel(&rg.to_dense(), &dense_projection(&g, &at.frame)?));
            w[2] = w[2].max(rg.norm() - g.frobenius_norm());

            let h = 1e-5;
            for _ in 0..3 {
                let xi = random_tangent(&at, rng);
                let xi = xi.scale(1.0 / xi.norm());
                let plus = retract(&at, &xi, -h)?;
                let minus = retract(&at, &xi, h)?;
                let lp = o.loss(WeightsView::factored(&base, plus.a_l(), plus.b()))?;
                let lm = o.loss(WeightsView::factored(&base, minus.a_l(), minus.b()))?;
                let fd = (lp - lm) / (2.0 * h);
                let exact = tangent_inner(&rg, &xi)?;
                w[3] = w[3].max((fd - exact).abs() / exact.abs().max(1e-3 * rg.norm()));
            }

            let counted = CountingOracle::new(o);
            riemannian_grad(&counted, &base, &at)?;
            w[4] = w[4].max((counted.right_calls() as f64 - 1.0).abs() + (counted.left_calls() as f64 - 1.0).abs());
        }
    }
    s.push("gvp_consistency", w[0], 1e-10);
    s.push("riemannian_grad_vs_projection", w[1], 1e-10);
    s.push("riemannian_grad_norm_bound", w[2].max(0.0), 1e-9);
    s.push("riemannian_grad_finite_difference", w[3], 1e-5);
    s.push("riemannian_grad_call_count", w[4], 0.0);
    Ok(())
}

/// Matrix with singular values `sigma` and random orthonormal singular vectors.
pub fn with_spectrum(m: usize, n: usize, sigma: &[f64], rng: &mut ChaCha8Rng) -> Result<DenseMatrix> {
    let u = DenseMatrix::random_orthonormal(m, sigma.len(), rng);
    let v = DenseMatrix::random_orthonormal(n, sigma.len(), rng);
    Ok(u.scale_columns(sigma).matmul_t(&v)?)
}

fn objective(g: &DenseMatrix, a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    let f = canonicalize(a, b)?;
    Ok(dense_projection(g, &f.frame)?.frobenius_norm_sq())
}

fn init_checks(s: &mut Suite, rng: &mut ChaCha8Rng, p: Profile) -> Result<()> {
    // Exact recovery of a rank-2 gradient.
    let g = with_spectrum(20, 15, &[5.0, 2.0], rng)?;
    let oracle = make_quadratic_oracle(g.scale(-1.0))?;
    let w0 = DenseMatrix::zeros(20, 15);
    let svd = backprop_rsvd(&oracle, WeightsView::dense(&w0), 2, &RsvdConfig::new(2, 1, rng.random()))?;
    let exact = (svd.sigma[0] - 5.0).abs() / 5.0 + (svd.sigma[1] - 2.0).abs() / 2.0;
    s.push("rsvd_exact_low_rank", exact.max(rel(&svd.to_dense(), &g)), 1e-8);

    // Decaying spectrum.
    let sigma: Vec<f64> = (1..=40).map(|i| 2f64.powi(-i)).collect();
    let g = with_spectrum(40, 40, &sigma, rng)?;
    let oracle = CountingOracle::new(make_quadratic_oracle(g.scale(-1.0))?);
    let w0 = DenseMatrix::zeros(40, 40);
    let svd = backprop_rsvd(&oracle, WeightsView::dense(&w0), 6, &RsvdConfig::new(6, 3, rng.random()))?;
    let worst = (0..6).map(|i| (svd.sigma[i] - sigma[i]).abs() / sigma[i]).fold(0.0, f64::max);
    s.push("rsvd_decaying_spectrum", worst, 0.01);
    s.push("rsvd_call_count", (oracle.total_calls() as f64 - 8.0).abs(), 0.0);

    // Locally optimal split.
    let (mut dense_obj, mut alpha_spread, mut preserve, mut mc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..p.trials().min(10) {
        let (m, n, r) = (12, 9, rng.random_range(1..=3));
        let w = DenseMatrix::random_normal(m, n, rng);
        let t = DenseMatrix::random_normal(m, n, rng);
        let o = make_quadratic_oracle(t)?;
        let g = o.dense_grad(WeightsView::dense(&w))?;
        let spectrum = svd_trunc(&g, 2 * r + 1)?;
        let top: f64 = spectrum.sigma[..2 * r].iter().map(|x| x * x).sum();
        let mut objs = Vec::new();
        for alpha in [0.1, 1.0, 10.0] {
            let res = loi_from_svd(&w, &spectrum, r, alpha)?;
            objs.push(objective(&g, res.point.a_l(), res.point.b())?);
        }
        dense_obj = dense_obj.max((objs[1] - top).abs() / top);
        alpha_spread = alpha_spread.max(objs.iter().map(|o| (o - objs[1]).abs() / top).fold(0.0, f64::max));

        let res = loi_split(&w, &o, r, 1.0, &RsvdConfig::new(r, 3, rng.random()))?;
        let before = o.loss(WeightsView::dense(&w))?;
        let after = o.loss(WeightsView::factored(&res.w_prime, res.point.a_l(), res.point.b()))?;
        preserve = preserve.max((after - before).abs() / before);

        let best = objs[1];
        let s1 = spectrum.sigma[0] * spectrum.sigma[0];
        let competitors = if p == Profile::Full { 1000 } else { 100 };
        for _ in 0..competitors {
            let a = DenseMatrix::random_normal(m, r, rng);
            let b = DenseMatrix::random_normal(n, r, rng);
            mc = mc.max((objective(&g, &a, &b)? - best) / s1);
        }
    }
    s.push("loi_objective_dense", dense_obj, 1e-8);
    s.push("loi_alpha_invariance", alpha_spread, 1e-9);
    s.push("loi_loss_preservation", preserve, 1e-10);
    s.push("loi_dominates_random_points", mc.max(0.0), 1e-9);
    Ok(())
}

fn quadratic_problem(rng: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> Result<(EffectiveWeights, riemannlora::oracle::QuadraticOracle)> {
    let base = DenseMatrix::random_normal(m, n, rng);
    let target = &base + &DenseMatrix::random_normal(m, n, rng);
    let at = random_point(m, n, r, rng)?;
    Ok((EffectiveWeights::new(base, at.point)?, make_quadratic_oracle(target)?))
}

fn inverse_transpose(s: &DenseMatrix) -> Result<DenseMatrix> {
    let inv = s
        .as_nalgebra()
        .clone()
        .try_inverse()
        .ok_or_else(|| riemannlora::Error::InvalidArgument("singular gauge".into()))?;
    Ok(DenseMatrix::from_nalgebra(inv.transpose())?)
}

/// Worst relative gap between dense iterates of two runs started from
/// `(A, B)` and `(A S, B S^{-T})`.
pub fn gauge_pair_gap(rng: &mut ChaCha8Rng, hyper: &RiemannHyper, steps: usize) -> Result<f64> {
    let (m, n, r) = (10, 8, 3);
    let base = DenseMatrix::random_normal(m, n, rng);
    let o = make_quadratic_oracle(&base + &DenseMatrix::random_normal(m, n, rng))?;
    let a = DenseMatrix::random_normal(m, r, rng);
    let b = DenseMatrix::random_normal(n, r, rng);
    let s = loop {
        let s = DenseMatrix::random_normal(r, r, rng);
        let sv = svd_trunc(&s, r)?.sigma;
        if sv[r - 1] > 0.2 * sv[0] {
            break s;
        }
    };
    let a2 = a.matmul(&s)?;
    let b2 = b.matmul(&inverse_transpose(&s)?)?;
    let mut w1 = EffectiveWeights::new(base.clone(), canonicalize(&a, &b)?.point)?;
    let mut w2 = EffectiveWeights::new(base, canonicalize(&a2, &b2)?.point)?;
    let (mut s1, mut s2) = (OptimizerState::default(), OptimizerState::default());
    let mut worst = 0.0f64;
    for _ in 0..steps {
        riemann_step(&mut w1, &mut s1, &o, hyper)?;
        riemann_step(&mut w2, &mut s2, &o, hyper)?;
        worst = worst.max(rel(&w2.point.to_dense(), &w1.point.to_dense()));
    }
    Ok(worst)
}

fn optimizer_checks(s: &mut Suite, rng: &mut ChaCha8Rng, p: Profile) -> Result<()> {
    let hb = RiemannHyper { eta: 0.05, beta: 0.7, simulate_adam: true, ..Default::default() };
    let mut gap = 0.0f64;
    for _ in 0..p.trials().min(5) {
        gap = gap.max(gauge_pair_gap(rng, &hb, 20)?);
    }
    s.push("reparameterization_invariance", gap, 1e-8);

    let (mut weights, o) = quadratic_problem(rng, 12, 9, 3)?;
    let counted = CountingOracle::new(o);
    let mut state = OptimizerState::default();
    let mut horiz = 0.0f64;
    let steps = 20;
    for _ in 0..steps {
        let rep = riemann_step(&mut weights, &mut state, &counted, &hb)?;
        let d = &rep.direction;
        horiz = horiz.max(d.horizontality_defect() / d.adot().frobenius_norm().max(f64::MIN_POSITIVE));
    }
    s.push("momentum_horizontality", horiz, 1e-9);
    let calls = (counted.right_calls() as f64 - steps as f64).abs() + (counted.left_calls() as f64 - steps as f64).abs();
    s.push("step_call_contract", calls, 0.0);

    let (mut weights, o) = quadratic_problem(rng, 9, 7, 2)?;
    let plain = RiemannHyper { eta: 0.1, ..Default::default() };
    let mut state = OptimizerState::default();
    let mut sd = 0.0f64;
    for _ in 0..5 {
        let at = weights.point.framed()?;
        let expected = riemannian_grad(&o, &weights.base, &at)?;
        let rep = riemann_step(&mut weights, &mut state, &o, &plain)?;
        sd = sd.max((&rep.direction.to_dense() - &expected.to_dense()).frobenius_norm() / expected.norm());
    }
    s.push("zero_momentum_is_steepest_descent", sd, 1e-12);

    // Largest first gradient at the locally optimal start.
    let (m, n, r) = (12, 10, 2);
    let w = DenseMatrix::random_normal(m, n, rng);
    let o = make_quadratic_oracle(DenseMatrix::random_normal(m, n, rng))?;
    let g = o.dense_grad(WeightsView::dense(&w))?;
    let res = loi_from_svd(&w, &svd_trunc(&g, 2 * r + 1)?, r, 1.0)?;
    let start = EffectiveWeights::new(res.w_prime, res.point)?;
    let best = riemannian_grad(&o, &start.base, &start.point.framed()?)?.norm().powi(2);
    let mut excess = 0.0f64;
    let starts = if p == Profile::Full { 200 } else { 50 };
    for _ in 0..starts {
        let at = random_point(m, n, r, rng)?;
        let base = &w - &at.point.to_dense();
        let rg = riemannian_grad(&o, &base, &at)?.norm().powi(2);
        excess = excess.max((rg - best) / best);
    }
    s.push("loi_first_gradient_maximal", excess.max(0.0), 1e-12);

    let (mut weights, o) = quadratic_problem(rng, 24, 17, 3)?;
    let mut state = OptimizerState::default();
    let (res, count) = probe::count_allocations(24, 17, || -> Result<()> {
        for _ in 0..5 {
            riemann_step(&mut weights, &mut state, &o, &hb)?;
        }
        Ok(())
    });
    res?;
    s.push("no_dense_allocation_in_step", count as f64, 0.0);
    Ok(())
}

fn harness_checks(s: &mut Suite, seed: u64) -> Result<()> {
    let base = ExperimentConfig {
        name: "check".into(),
        m: 16,
        n: 12,
        r: 2,
        true_rank: 2,
        max_iters: 15,
        seed,
        ..Default::default()
    };
    let mut mismatches = 0.0;
    for (task, optimizer, init) in [
        (TaskKind::LowrankRecovery, OptimizerKind::RiemannHb, InitChoice::Loi),
        (TaskKind::Linreg, OptimizerKind::RiemannAdamSim, InitChoice::ZeroBEps),
        (TaskKind::ToyMlp, OptimizerKind::EuclidAdam, InitChoice::OrthoA),
    ] {
        let cfg = ExperimentConfig { task, optimizer, init, eta: 0.05, ..base.clone() };
        let csv = |cfg: &ExperimentConfig| -> Result<String> {
            let out = run_experiment(cfg)?;
            let mut buf = Vec::new();
            write_csv(&mut buf, &out.records, out.error.as_ref()).expect("Vec write");
            let text = String::from_utf8(buf).expect("ASCII");
            Ok(text
                .lines()
                .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
                .collect::<Vec<_>>()
                .join("\n"))
        };
        if csv(&cfg)? != csv(&cfg)? {
            mismatches += 1.0;
        }
    }
    s.push("csv_determinism", mismatches, 0.0);

    let mut total = 0usize;
    for optimizer in [OptimizerKind::RiemannHb, OptimizerKind::RiemannAdamSim] {
        let cfg = ExperimentConfig { m: 24, n: 17, optimizer, eta: 0.05, ..base.clone() };
        let mut session = Session::new(&cfg)?;
        let (res, count) = probe::count_allocations(24, 17, || -> Result<()> {
            for _ in 0..5 {
                session.advance()?;
                session.loss()?;
            }
            Ok(())
        });
        res?;
        total += count;
    }
    s.push("no_dense_allocation_in_run_loop", total as f64, 0.0);
    Ok(())
}

/// Runs the whole suite. Numerical errors inside a check propagate as errors.
pub fn check_invariants(profile: Profile, seed: u64, opts: CheckOptions) -> Result<Vec<InvariantResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Suite::default();
    linalg_checks(&mut s, &mut rng, profile)?;
    manifold_checks(&mut s, &mut rng, profile, opts)?;
    gradient_checks(&mut s, &mut rng, profile)?;
    init_checks(&mut s, &mut rng, profile)?;
    optimizer_checks(&mut s, &mut rng, profile)?;
    harness_checks(&mut s, seed)?;
    Ok(s.results)
}

pub fn write_report<W: Write>(mut out: W, results: &[InvariantResult]) -> std::io::Result<()> {
    writeln!(out, "name,residual,tolerance,pass")?;
    for r in results {
        writeln!(out, "{},{:e},{:e},{}", r.name, r.residual, r.tolerance, r.pass())?;
    }
    Ok(())
}

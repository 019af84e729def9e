//! Convex integrands F(ξ) with q-growth: built-in families, evaluation,
//! canonical subgradients, p-norm smoothing of the nonsmooth family, and
//! randomized audits that measure convexity / growth / monotonicity moduli.
//!
//! Convexity convention used throughout: F is uniformly convex with modulus
//! `alpha` when `F(ξ)/2 + F(η)/2 - F((ξ+η)/2) >= (alpha/2) |ξ-η|^q`, and (for
//! q = 2) has upper modulus `beta` when the same gap is `<= (beta/2) |ξ-η|²`.
//! Audit margins are normalized by `max(1, |ξ|, |η|)^q` so that identities
//! which hold exactly in real arithmetic stay near machine precision across
//! six decades of sampled radii.

use crate::error::{Error, Result};
use crate::linalg::sym_eigenvalues;
use crate::par;
use crate::report::TextReport;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Built-in integrand families.
#[derive(Debug, Clone, PartialEq)]
pub enum IntegrandKind {
    /// F(ξ) = Aξ·ξ with A symmetric positive definite (q = 2).
    QuadraticForm { matrix: Vec<f64> },
    /// F(ξ) = |ξ|^q.
    Power,
    /// F(ξ) = |ξ|^q + weight · (max_i |ξ_i|)^q; nonsmooth on the max ties.
    AnisoMax { weight: f64 },
}

/// An integrand together with its dimension, exponents, and certified moduli.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrandSpec {
    pub kind: IntegrandKind,
    /// Number of gradient components the density consumes.
    pub dim: usize,
    /// Growth exponent, q >= 2.
    pub q: f64,
    /// Dual exponent q' = q/(q-1).
    pub q_dual: f64,
    /// Lower growth constant: F(ξ) >= lambda_lo |ξ|^q.
    pub lambda_lo: f64,
    /// Upper growth constant: F(ξ) <= lambda_hi |ξ|^q.
    pub lambda_hi: f64,
    /// Certified uniform-convexity modulus.
    pub alpha: f64,
    /// Certified upper modulus (q = 2 families only).
    pub beta: Option<f64>,
    /// p-norm smoothing parameter for the max family; 0 means no smoothing.
    pub smoothing_mu: f64,
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "dimension must be 1, 2, or 3, got {dim}"
        )))
    }
}

fn check_q(q: f64) -> Result<()> {
    if !q.is_finite() || q < 2.0 {
        Err(Error::InvalidSpec(format!("q must be >= 2, got {q}")))
    } else {
        Ok(())
    }
}

impl IntegrandSpec {
    /// F(ξ) = Aξ·ξ. The matrix is row-major `dim x dim`, must be symmetric
    /// positive definite; the sharp moduli come from its spectrum.
    pub fn quadratic_form(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if matrix.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        let eigs = sym_eigenvalues(&matrix, dim)?;
        let lo = eigs[0];
        let hi = eigs[dim - 1];
        if !(lo > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "matrix is not positive definite (smallest eigenvalue {lo})"
            )));
        }
        Ok(IntegrandSpec {
            kind: IntegrandKind::QuadraticForm { matrix },
            dim,
            q: 2.0,
            q_dual: 2.0,
            lambda_lo: lo,
            lambda_hi: hi,
            alpha: lo / 2.0,
            beta: Some(hi / 2.0),
            smoothing_mu: 0.0,
        })
    }

    /// F(ξ) = |ξ|^q.
    pub fn power(dim: usize, q: f64) -> Result<Self> {
        check_dim(dim)?;
        check_q(q)?;
        Ok(IntegrandSpec {
            kind: IntegrandKind::Power,
            dim,
            q,
            q_dual: q / (q - 1.0),
            lambda_lo: 1.0,
            lambda_hi: 1.0,
            // Sharp: equality at antipodal pairs.
            alpha: (2.0f64).powf(1.0 - q),
            beta: if q == 2.0 { Some(0.5) } else { None },
            smoothing_mu: 0.0,
        })
    }

    /// F(ξ) = |ξ|^q + weight · (max_i |ξ_i|)^q with weight >= 0.
    pub fn aniso_max(dim: usize, q: f64, weight: f64) -> Result<Self> {
        check_dim(dim)?;
        check_q(q)?;
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "max-term weight must be finite and >= 0, got {weight}"
            )));
        }
        Ok(IntegrandSpec {
            kind: IntegrandKind::AnisoMax { weight },
            dim,
            q,
            q_dual: q / (q - 1.0),
            lambda_lo: 1.0,
            lambda_hi: 1.0 + weight,
            // Certified by the |ξ|^q part alone (the max term is convex).
            alpha: (2.0f64).powf(1.0 - q),
            beta: if q == 2.0 {
                Some((1.0 + weight) / 2.0)
            } else {
                None
            },
            smoothing_mu: 0.0,
        })
    }

    /// Copy of this spec with a different smoothing parameter.
    pub fn with_smoothing(&self, mu: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 || mu > 1.0 {
            return Err(Error::InvalidSpec(format!(
                "smoothing parameter must lie in [0, 1], got {mu}"
            )));
        }
        let mut out = self.clone();
        out.smoothing_mu = mu;
        Ok(out)
    }

    /// True when the density is differentiable everywhere (so a plain
    /// gradient method needs no smoothing stages).
    pub fn is_smooth(&self) -> bool {
        match &self.kind {
            IntegrandKind::AnisoMax { weight } => *weight == 0.0 || self.smoothing_mu > 0.0,
            _ => true,
        }
    }

    /// Density value; `xi` must have length `dim`.
    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: xi.len(),
            });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite gradient component".into()));
        }
        Ok(self.density(xi))
    }

    /// Canonical subgradient; at max ties the extreme selections are averaged
    /// (a valid subgradient since the subdifferential is convex).
    pub fn subgradient(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: xi.len(),
            });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite gradient component".into()));
        }
        let mut out = vec![0.0; self.dim];
        self.subgradient_into(xi, &mut out);
        Ok(out)
    }

    #[inline]
    fn power_density(&self, xi: &[f64]) -> f64 {
        let s: f64 = xi.iter().map(|v| v * v).sum();
        if self.q == 2.0 {
            s
        } else if self.q == 4.0 {
            s * s
        } else if s == 0.0 {
            0.0
        } else {
            s.powf(self.q / 2.0)
        }
    }

    #[inline]
    fn qth_power_abs(&self, m: f64) -> f64 {
        let a = m.abs();
        if self.q == 2.0 {
            a * a
        } else if self.q == 4.0 {
            let t = a * a;
            t * t
        } else if a == 0.0 {
            0.0
        } else {
            a.powf(self.q)
        }
    }

    /// p-norm with p = 1/mu, computed in overflow-safe ratio form.
    fn pnorm(&self, xi: &[f64], mu: f64) -> f64 {
        let m = xi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m == 0.0 {
            return 0.0;
        }
        let p = 1.0 / mu;
        let s: f64 = xi.iter().map(|v| (v.abs() / m).powf(p)).sum();
        m * s.powf(mu)
    }

    pub(crate) fn density(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.dim);
        match &self.kind {
            IntegrandKind::QuadraticForm { matrix } => {
                let n = self.dim;
                let mut acc = 0.0;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        row += matrix[i * n + j] * xi[j];
                    }
                    acc += row * xi[i];
                }
                acc
            }
            IntegrandKind::Power => self.power_density(xi),
            IntegrandKind::AnisoMax { weight } => {
                let base = self.power_density(xi);
                let m = if self.smoothing_mu > 0.0 {
                    self.pnorm(xi, self.smoothing_mu)
                } else {
                    xi.iter().fold(0.0f64, |a, v| a.max(v.abs()))
                };
                base + weight * self.qth_power_abs(m)
            }
        }
    }

    pub(crate) fn subgradient_into(&self, xi: &[f64], out: &mut [f64]) {
        debug_assert_eq!(xi.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        match &self.kind {
            IntegrandKind::QuadraticForm { matrix } => {
                let n = self.dim;
                for (i, slot) in out.iter_mut().enumerate() {
                    let mut row = 0.0;
                    for j in 0..n {
                        row += matrix[i * n + j] * xi[j];
                    }
                    *slot = 2.0 * row;
                }
            }
            IntegrandKind::Power => {
                self.power_grad_into(xi, out);
            }
            IntegrandKind::AnisoMax { weight } => {
                self.power_grad_into(xi, out);
                if *weight == 0.0 {
                    return;
                }
                if self.smoothing_mu > 0.0 {
                    let mu = self.smoothing_mu;
                    let np = self.pnorm(xi, mu);
                    if np == 0.0 {
                        return;
                    }
                    let p = 1.0 / mu;
                    // q ||ξ||_p^{q-1} (|ξ_i|/||ξ||_p)^{p-1} sign(ξ_i): the
                    // ratio form keeps intermediates in range for large p.
                    let coef = weight * self.q * np.powf(self.q - 1.0);
                    for (slot, &v) in out.iter_mut().zip(xi) {
                        if v != 0.0 {
                            *slot += coef * (v.abs() / np).powf(p - 1.0) * v.signum();
                        }
                    }
                } else {
                    let m = xi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    if m == 0.0 {
                        return;
                    }
                    let ties = xi.iter().filter(|v| v.abs() == m).count();
                    let coef = weight * self.q * if self.q == 2.0 {
                        m
                    } else if self.q == 4.0 {
                        m * m * m
                    } else {
                        m.powf(self.q - 1.0)
                    } / ties as f64;
                    for (slot, &v) in out.iter_mut().zip(xi) {
                        if v.abs() == m {
                            *slot += coef * v.signum();
                        }
                    }
                }
            }
        }
    }

    #[inline]
    fn power_grad_into(&self, xi: &[f64], out: &mut [f64]) {
        let s: f64 = xi.iter().map(|v| v * v).sum();
        let w = if self.q == 2.0 {
            2.0
        } else if self.q == 4.0 {
            4.0 * s
        } else if s == 0.0 {
            0.0
        } else {
            self.q * s.powf(self.q / 2.0 - 1.0)
        };
        for (slot, &v) in out.iter_mut().zip(xi) {
            *slot = w * v;
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// |ξ-η|^q scale used to normalize audit margins.
fn pair_scale(q: f64, xi: &[f64], eta: &[f64]) -> f64 {
    let m = norm2(xi).max(norm2(eta)).max(1.0);
    m.powf(q)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let n = norm2(&v);
        if n > 1e-12 {
            // Radii span six decades so homogeneity bugs cannot hide.
            let r = (10.0f64).powf(rng.gen::<f64>() * 6.0 - 3.0);
            return v.iter().map(|x| x / n * r).collect();
        }
    }
}

/// Deterministic sample of vector pairs: hand-picked extreme pairs first
/// (antipodal axes, max ties, the six-decade radius endpoints), then seeded
/// random fill up to `count`.
pub fn sample_pairs(dim: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let axis = |i: usize, s: f64| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = s;
        v
    };
    let scale = |v: &[f64], s: f64| -> Vec<f64> { v.iter().map(|x| x * s).collect() };
    let ones: Vec<f64> = {
        let n = (dim as f64).sqrt();
        vec![1.0 / n; dim]
    };
    let mut forced: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    forced.push((vec![0.0; dim], vec![0.0; dim]));
    for i in 0..dim {
        let e = axis(i, 1.0);
        forced.push((e.clone(), scale(&e, -1.0)));
        forced.push((e.clone(), vec![0.0; dim]));
        for r in [1e-3, 1e3] {
            forced.push((scale(&e, r), scale(&e, -r)));
        }
    }
    forced.push((ones.clone(), scale(&ones, -1.0)));
    forced.push((scale(&ones, 1e3), scale(&ones, -1e3)));
    if dim >= 2 {
        // Pairs that cross and sit on max ties.
        forced.push((axis(0, 1.0), axis(1, 1.0)));
        let mut mixed = vec![0.0; dim];
        mixed[0] = 1.0 / (2.0f64).sqrt();
        mixed[1] = -1.0 / (2.0f64).sqrt();
        forced.push((mixed.clone(), scale(&mixed, -1.0)));
        forced.push((ones.clone(), mixed));
    }
    forced.truncate(count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while forced.len() < count {
        forced.push((random_point(&mut rng, dim), random_point(&mut rng, dim)));
    }
    forced
}

/// Outcome of a sampled modulus audit. `worst_margin` is the most adverse
/// normalized margin (negative means the claimed modulus was violated).
#[derive(Debug, Clone)]
pub struct ModulusAudit {
    pub label: &'static str,
    pub modulus: f64,
    pub samples: usize,
    pub tol: f64,
    pub worst_margin: f64,
    pub worst_pair: (Vec<f64>, Vec<f64>),
    pub pass: bool,
}

impl ModulusAudit {
    pub fn text(&self) -> TextReport {
        let mut r = TextReport::new();
        r.set(&format!("{}.samples", self.label), self.samples);
        r.set_f64(&format!("{}.modulus", self.label), self.modulus);
        r.set_f64(&format!("{}.tol", self.label), self.tol);
        r.set_f64(&format!("{}.worst_margin", self.label), self.worst_margin);
        r.set_bool(&format!("{}.pass", self.label), self.pass);
        r
    }
}

fn worst_over_pairs<F>(pairs: &[(Vec<f64>, Vec<f64>)], margin: F) -> (f64, usize)
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let per_chunk = par::map_chunks(pairs.len(), |r| {
        let mut best = (f64::INFINITY, usize::MAX);
        for i in r {
            let m = margin(&pairs[i].0, &pairs[i].1);
            if m < best.0 {
                best = (m, i);
            }
        }
        best
    });
    let mut best = (f64::INFINITY, 0usize);
    for (m, i) in per_chunk {
        if m < best.0 {
            best = (m, i);
        }
    }
    best
}

/// Check `F(ξ)/2 + F(η)/2 - F(mid) >= (alpha/2)|ξ-η|^q` on sampled pairs,
/// with margins normalized by `max(1,|ξ|,|η|)^q`.
pub fn audit_convexity(
    spec: &IntegrandSpec,
    alpha: f64,
    count: usize,
    seed: u64,
    tol: f64,
) -> ModulusAudit {
    let pairs = sample_pairs(spec.dim, count, seed);
    let q = spec.q;
    let (worst, idx) = worst_over_pairs(&pairs, |xi, eta| {
        let mid: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| 0.5 * (a + b)).collect();
        let d: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| a - b).collect();
        let gap = 0.5 * spec.density(xi) + 0.5 * spec.density(eta) - spec.density(&mid);
        let dq = norm2(&d).powf(q);
        (gap - 0.5 * alpha * dq) / pair_scale(q, xi, eta)
    });
    ModulusAudit {
        label: "convexity",
        modulus: alpha,
        samples: pairs.len(),
        tol,
        worst_margin: worst,
        worst_pair: pairs[idx].clone(),
        pass: worst >= -tol,
    }
}

/// Check `F(ξ)/2 + F(η)/2 - F(mid) <= (beta/2)|ξ-η|²` (quadratic-growth
/// families only).
pub fn audit_upper_modulus(
    spec: &IntegrandSpec,
    beta: f64,
    count: usize,
    seed: u64,
    tol: f64,
) -> Result<ModulusAudit> {
    if spec.q != 2.0 {
        return Err(Error::Unsupported(format!(
            "upper modulus audit requires q = 2, got q = {}",
            spec.q
        )));
    }
    let pairs = sample_pairs(spec.dim, count, seed);
    let (worst, idx) = worst_over_pairs(&pairs, |xi, eta| {
        let mid: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| 0.5 * (a + b)).collect();
        let d: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| a - b).collect();
        let gap = 0.5 * spec.density(xi) + 0.5 * spec.density(eta) - spec.density(&mid);
        let d2: f64 = d.iter().map(|v| v * v).sum();
        (0.5 * beta * d2 - gap) / pair_scale(2.0, xi, eta)
    });
    Ok(ModulusAudit {
        label: "upper_modulus",
        modulus: beta,
        samples: pairs.len(),
        tol,
        worst_margin: worst,
        worst_pair: pairs[idx].clone(),
        pass: worst >= -tol,
    })
}

/// Check the subgradient inequality `F(η) >= F(ξ) + g(ξ)·(η-ξ)` for the
/// canonical (tie-averaged) subgradient.
pub fn audit_subgradient(
    spec: &IntegrandSpec,
    count: usize,
    seed: u64,
    tol: f64,
) -> ModulusAudit {
    let pairs = sample_pairs(spec.dim, count, seed);
    let (worst, idx) = worst_over_pairs(&pairs, |xi, eta| {
        let mut g = vec![0.0; spec.dim];
        spec.subgradient_into(xi, &mut g);
        let lin: f64 = g.iter().zip(eta.iter().zip(xi)).map(|(gi, (e, x))| gi * (e - x)).sum();
        (spec.density(eta) - spec.density(xi) - lin) / pair_scale(spec.q, xi, eta)
    });
    ModulusAudit {
        label: "subgradient",
        modulus: 0.0,
        samples: pairs.len(),
        tol,
        worst_margin: worst,
        worst_pair: pairs[idx].clone(),
        pass: worst >= -tol,
    }
}

/// Measured growth envelope `lo |ξ|^q <= F(ξ) <= hi |ξ|^q` over sample points.
#[derive(Debug, Clone)]
pub struct GrowthAudit {
    pub lo_claim: f64,
    pub hi_claim: f64,
    pub lo_measured: f64,
    pub hi_measured: f64,
    pub samples: usize,
    pub tol: f64,
    pub pass: bool,
}

impl GrowthAudit {
    pub fn text(&self) -> TextReport {
        let mut r = TextReport::new();
        r.set_f64("growth.lo_claim", self.lo_claim);
        r.set_f64("growth.hi_claim", self.hi_claim);
        r.set_f64("growth.lo_measured", self.lo_measured);
        r.set_f64("growth.hi_measured", self.hi_measured);
        r.set("growth.samples", self.samples);
        r.set_bool("growth.pass", self.pass);
        r
    }
}

/// Measure `F(ξ)/|ξ|^q` over sampled points and compare with the spec's
/// declared envelope.
pub fn audit_growth(spec: &IntegrandSpec, count: usize, seed: u64, tol: f64) -> GrowthAudit {
    let pairs = sample_pairs(spec.dim, count.div_ceil(2), seed);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(pairs.len() * 2);
    for (a, b) in pairs {
        points.push(a);
        points.push(b);
    }
    let ratios = par::map_chunks(points.len(), |r| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in r {
            let n = norm2(&points[i]);
            if n == 0.0 {
                continue;
            }
            let ratio = spec.density(&points[i]) / n.powf(spec.q);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        (lo, hi)
    });
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (l, h) in ratios {
        lo = lo.min(l);
        hi = hi.max(h);
    }
    let pass = lo >= spec.lambda_lo - tol && hi <= spec.lambda_hi + tol;
    GrowthAudit {
        lo_claim: spec.lambda_lo,
        hi_claim: spec.lambda_hi,
        lo_measured: lo,
        hi_measured: hi,
        samples: points.len(),
        tol,
        pass,
    }
}

/// Monotonicity constant of the subgradient and the convexity modulus
/// derived from it.
#[derive(Debug, Clone)]
pub struct MonotonicityAudit {
    /// Measured infimum of `(g(ξ)-g(η))·(ξ-η) / |ξ-η|^q`.
    pub a_hat: f64,
    /// Convexity modulus implied by `a_hat`: `a_hat / (2q)`.
    pub alpha_derived: f64,
    /// Convexity audit re-run at the derived modulus.
    pub convexity: ModulusAudit,
    pub pass: bool,
}

impl MonotonicityAudit {
    pub fn text(&self) -> TextReport {
        let mut r = TextReport::new();
        r.set_f64("monotonicity.a_hat", self.a_hat);
        r.set_f64("monotonicity.alpha_derived", self.alpha_derived);
        r.set_f64(
            "monotonicity.convexity_worst_margin",
            self.convexity.worst_margin,
        );
        r.set_bool("monotonicity.pass", self.pass);
        r
    }
}

/// Measure the subgradient monotonicity constant and verify that the
/// convexity modulus it implies actually holds.
pub fn derive_alpha_from_monotonicity(
    spec: &IntegrandSpec,
    count: usize,
    seed: u64,
    tol: f64,
) -> MonotonicityAudit {
    let pairs = sample_pairs(spec.dim, count, seed);
    let q = spec.q;
    let per_chunk = par::map_chunks(pairs.len(), |r| {
        let mut g_xi = vec![0.0; spec.dim];
        let mut g_eta = vec![0.0; spec.dim];
        let mut a_min = f64::INFINITY;
        for i in r {
            let (xi, eta) = &pairs[i];
            let d: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| a - b).collect();
            let dn = norm2(&d);
            // Skip near-coincident pairs: the quotient is exact-arithmetic
            // positive there but dominated by cancellation noise.
            if dn < 1e-8 * norm2(xi).max(norm2(eta)).max(1.0) {
                continue;
            }
            spec.subgradient_into(xi, &mut g_xi);
            spec.subgradient_into(eta, &mut g_eta);
            let num: f64 = g_xi
                .iter()
                .zip(&g_eta)
                .zip(&d)
                .map(|((a, b), di)| (a - b) * di)
                .sum();
            a_min = a_min.min(num / dn.powf(q));
        }
        a_min
    });
    let a_hat = per_chunk.into_iter().fold(f64::INFINITY, f64::min);
    let alpha_derived = a_hat / (2.0 * q);
    let convexity = audit_convexity(spec, alpha_derived, count, seed.wrapping_add(1), tol);
    let pass = a_hat.is_finite() && a_hat > 0.0 && convexity.pass;
    MonotonicityAudit {
        a_hat,
        alpha_derived,
        convexity,
        pass,
    }
}

/// Measured constant in `|g(ξ) - g(η)| <= c · max(|ξ|,|η|)^{q-2} |ξ-η|`.
#[derive(Debug, Clone)]
pub struct LipschitzAudit {
    pub c_claim: f64,
    pub c_measured: f64,
    pub samples: usize,
    pub pass: bool,
}

impl LipschitzAudit {
    pub fn text(&self) -> TextReport {
        let mut r = TextReport::new();
        r.set_f64("lipschitz.c_claim", self.c_claim);
        r.set_f64("lipschitz.c_measured", self.c_measured);
        r.set("lipschitz.samples", self.samples);
        r.set_bool("lipschitz.pass", self.pass);
        r
    }
}

/// Default claim for the local gradient Lipschitz constant:
/// `lambda_hi · q(q-1)` (sharp for the quadratic family, valid for all
/// built-ins by a Hessian bound).
pub fn lipschitz_claim(spec: &IntegrandSpec) -> f64 {
    spec.lambda_hi * spec.q * (spec.q - 1.0)
}

/// Measure the local Lipschitz ratio of subgradient differences.
pub fn audit_gradient_lipschitz(
    spec: &IntegrandSpec,
    c_claim: f64,
    count: usize,
    seed: u64,
    tol: f64,
) -> LipschitzAudit {
    let pairs = sample_pairs(spec.dim, count, seed);
    let q = spec.q;
    let per_chunk = par::map_chunks(pairs.len(), |r| {
        let mut g_xi = vec![0.0; spec.dim];
        let mut g_eta = vec![0.0; spec.dim];
        let mut c_max = 0.0f64;
        for i in r {
            let (xi, eta) = &pairs[i];
            let d: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| a - b).collect();
            let dn = norm2(&d);
            let m = norm2(xi).max(norm2(eta));
            if dn < 1e-8 * m.max(1.0) || m == 0.0 {
                continue;
            }
            spec.subgradient_into(xi, &mut g_xi);
            spec.subgradient_into(eta, &mut g_eta);
            let gd: f64 = g_xi
                .iter()
                .zip(&g_eta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let denom = if q == 2.0 { dn } else { m.powf(q - 2.0) * dn };
            c_max = c_max.max(gd / denom);
        }
        c_max
    });
    let c_measured = per_chunk.into_iter().fold(0.0f64, f64::max);
    LipschitzAudit {
        c_claim,
        c_measured,
        samples: count,
        pass: c_measured <= c_claim * (1.0 + tol),
    }
}

/// Bundle of every audit at the spec's declared moduli; `pass` is their
/// conjunction. This is what gates a solve.
#[derive(Debug, Clone)]
pub struct AuditBundle {
    pub convexity: ModulusAudit,
    pub growth: GrowthAudit,
    pub subgradient: ModulusAudit,
    pub upper: Option<ModulusAudit>,
    pub monotonicity: MonotonicityAudit,
    pub lipschitz: LipschitzAudit,
    pub pass: bool,
}

impl AuditBundle {
    pub fn text(&self) -> TextReport {
        let mut r = TextReport::new();
        r.merge_prefixed("audit", &self.convexity.text());
        r.merge_prefixed("audit", &self.growth.text());
        r.merge_prefixed("audit", &self.subgradient.text());
        if let Some(u) = &self.upper {
            r.merge_prefixed("audit", &u.text());
        }
        r.merge_prefixed("audit", &self.monotonicity.text());
        r.merge_prefixed("audit", &self.lipschitz.text());
        r.set_bool("audit.pass", self.pass);
        r
    }
}

/// Run every applicable audit at the declared moduli.
pub fn audit_all(spec: &IntegrandSpec, count: usize, seed: u64, tol: f64) -> AuditBundle {
    let convexity = audit_convexity(spec, spec.alpha, count, seed, tol);
    let growth = audit_growth(spec, count, seed.wrapping_add(1), tol);
    let subgradient = audit_subgradient(spec, count, seed.wrapping_add(2), tol);
    let upper = spec
        .beta
        .map(|b| audit_upper_modulus(spec, b, count, seed.wrapping_add(3), tol).expect("q = 2"));
    let monotonicity = derive_alpha_from_monotonicity(spec, count, seed.wrapping_add(4), tol);
    let lipschitz =
        audit_gradient_lipschitz(spec, lipschitz_claim(spec), count, seed.wrapping_add(5), tol);
    let pass = convexity.pass
        && growth.pass
        && subgradient.pass
        && upper.as_ref().map_or(true, |u| u.pass)
        && monotonicity.pass
        && lipschitz.pass;
    AuditBundle {
        convexity,
        growth,
        subgradient,
        upper,
        monotonicity,
        lipschitz,
        pass,
    }
}

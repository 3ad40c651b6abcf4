//! Equilibria of cell models: location, characteristic polynomial,
//! Routh–Hurwitz minors and spectral stability.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::polish_root;
use crate::linalg::{self, DenseLu};
use crate::model::{analytic_jacobian, CellModel, ParameterSet};

/// Eigenvalues with |Re| below this are treated as on the stability boundary.
pub const MARGINAL_BAND: f64 = 1e-8;
/// Accepted rhs residual (max norm) of an equilibrium.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }

    /// Classify from the largest real part of a spectrum.
    pub fn from_max_re(max_re: f64) -> Stability {
        if max_re.abs() < MARGINAL_BAND {
            Stability::Marginal
        } else if max_re < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    /// Value of the bifurcation parameter (NaN when none is designated).
    pub param: f64,
    pub state: Vec<f64>,
    #[serde(with = "complex_list")]
    pub eigenvalues: Vec<Complex64>,
    /// a1..an of λ^n + a1 λ^(n-1) + ... + an.
    pub char_coeffs: Vec<f64>,
    pub hurwitz: Vec<f64>,
    pub stability: Stability,
    pub residual: f64,
    /// False when the full Newton polish did not converge and the scalar
    /// root is reported instead.
    pub polished: bool,
}

impl EquilibriumPoint {
    pub fn v(&self) -> f64 {
        self.state[0]
    }

    pub fn max_re(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Angular frequency of the complex pair closest to the imaginary axis.
    pub fn omega0(&self) -> Option<f64> {
        self.eigenvalues
            .iter()
            .filter(|z| z.im > 0.0)
            .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
            .map(|z| z.im)
    }
}

pub(crate) mod complex_list {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let v: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|[a, b]| Complex64::new(a, b)).collect())
    }
}

/// dV/dt with every gate at its steady state for `v` (no stimulus).
pub fn reduced_residual(model: &dyn CellModel, p: &ParameterSet, v: f64) -> f64 {
    let s = crate::model::steady_state_at(model, v, p);
    let mut out = vec![0.0; s.len()];
    model.eval_rhs(&s, p, 0.0, &mut out);
    out[0]
}

/// Derivative of [`reduced_residual`] with respect to V.
pub fn reduced_slope(model: &dyn CellModel, p: &ParameterSet, v: f64) -> f64 {
    let s = crate::model::steady_state_at(model, v, p);
    let n = s.len();
    let mut j = vec![0.0; n * n];
    model.eval_jacobian(&s, p, &mut j);
    let mut d = j[0];
    for g in 0..model.gate_count() {
        d += j[g + 1] * model.rates(g, v, p).dsteady();
    }
    d
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Full-dimension Newton polish of a state. Returns the state and residual,
/// or `None` if the iteration fails to reach [`RESIDUAL_TOL`].
fn newton_polish(model: &dyn CellModel, p: &ParameterSet, x0: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut f = vec![0.0; n];
    let mut j = vec![0.0; n * n];
    model.eval_rhs(&x, p, 0.0, &mut f);
    let mut r = max_abs(&f);
    for _ in 0..30 {
        if r < 1e-15 {
            break;
        }
        model.eval_jacobian(&x, p, &mut j);
        let lu = DenseLu::factor(n, j.clone()).ok()?;
        let mut dx: Vec<f64> = f.iter().map(|v| -v).collect();
        lu.solve(&mut dx);
        let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        model.eval_rhs(&xn, p, 0.0, &mut f);
        let rn = max_abs(&f);
        if !rn.is_finite() {
            return None;
        }
        let small_step = max_abs(&dx) < 1e-14 * (1.0 + max_abs(&x));
        x = xn;
        let stalled = rn >= r;
        r = rn;
        if small_step || (stalled && r < RESIDUAL_TOL) {
            break;
        }
    }
    model.eval_rhs(&x, p, 0.0, &mut f);
    let r = max_abs(&f);
    (r < RESIDUAL_TOL).then_some((x, r))
}

/// Build the point for a scalar root `v`, polishing in full dimension.
fn from_scalar_root(model: &dyn CellModel, p: &ParameterSet, v: f64, param: f64) -> Result<EquilibriumPoint> {
    let x0 = crate::model::steady_state_at(model, v, p);
    match newton_polish(model, p, &x0) {
        Some((x, _)) => {
            // Gates sit on their nullclines; re-project to remove rounding drift.
            let x = crate::model::steady_state_at(model, x[0], p);
            let mut pt = analyze(model, p, &x, param)?;
            if pt.residual >= RESIDUAL_TOL {
                pt = analyze(model, p, &x0, param)?;
                pt.polished = false;
            }
            Ok(pt)
        }
        None => {
            let mut pt = analyze(model, p, &x0, param)?;
            pt.polished = false;
            Ok(pt)
        }
    }
}

/// Equilibrium with V in `bracket`, where the reduced residual changes sign.
pub fn find_equilibrium(model: &dyn CellModel, p: &ParameterSet, bracket: (f64, f64)) -> Result<EquilibriumPoint> {
    let (a, b) = bracket;
    let ga = reduced_residual(model, p, a);
    let gb = reduced_residual(model, p, b);
    if !(ga.is_finite() && gb.is_finite()) || (ga > 0.0) == (gb > 0.0) && ga != 0.0 && gb != 0.0 {
        return Err(Error::NotFound(format!("no sign change of the reduced residual on [{a}, {b}] mV")));
    }
    let g = |v: f64| reduced_residual(model, p, v);
    let v = polish_root(&g, a, b, 1e-13 * (1.0 + a.abs().max(b.abs())));
    from_scalar_root(model, p, v, f64::NAN)
}

/// Equilibrium by scalar Newton from a seed voltage.
pub fn find_equilibrium_near(model: &dyn CellModel, p: &ParameterSet, v_seed: f64) -> Result<EquilibriumPoint> {
    let mut v = v_seed;
    for _ in 0..60 {
        let g = reduced_residual(model, p, v);
        let d = reduced_slope(model, p, v);
        if !(g.is_finite() && d.is_finite()) || d == 0.0 {
            return Err(Error::Convergence { msg: "scalar Newton for V_inf".into(), residual: g.abs() });
        }
        let step = (g / d).clamp(-10.0, 10.0);
        v -= step;
        if step.abs() < 1e-13 * (1.0 + v.abs()) {
            break;
        }
    }
    let r = reduced_residual(model, p, v);
    if !(r.abs() < 1e-6) {
        return Err(Error::Convergence { msg: "scalar Newton for V_inf".into(), residual: r.abs() });
    }
    from_scalar_root(model, p, v, f64::NAN)
}

/// Every equilibrium with V in `range`, found by scanning `samples`
/// subintervals for sign changes. Sorted by V.
pub fn find_all_equilibria(model: &dyn CellModel, p: &ParameterSet, range: (f64, f64), samples: usize) -> Vec<EquilibriumPoint> {
    let (lo, hi) = range;
    let n = samples.max(2);
    let mut out = Vec::new();
    let mut va = lo;
    let mut ga = reduced_residual(model, p, va);
    for k in 1..=n {
        let vb = lo + (hi - lo) * k as f64 / n as f64;
        let gb = reduced_residual(model, p, vb);
        if ga.is_finite() && gb.is_finite() && ((ga > 0.0) != (gb > 0.0) || gb == 0.0) {
            if let Ok(e) = find_equilibrium(model, p, (va, vb)) {
                if out.last().map_or(true, |l: &EquilibriumPoint| (l.v() - e.v()).abs() > 1e-9) {
                    out.push(e);
                }
            }
        }
        va = vb;
        ga = gb;
    }
    out
}

/// Voltage range scanned by default.
pub const DEFAULT_RANGE: (f64, f64) = (-150.0, 100.0);

/// The equilibrium with the lowest V in the default range.
pub fn find_rest(model: &dyn CellModel, p: &ParameterSet) -> Result<EquilibriumPoint> {
    find_all_equilibria(model, p, DEFAULT_RANGE, 2500)
        .into_iter()
        .next()
        .ok_or_else(|| Error::NotFound("no equilibrium in [-150, 100] mV".into()))
}

/// Spectrum, characteristic coefficients and minors at `state`.
pub fn analyze(model: &dyn CellModel, p: &ParameterSet, state: &[f64], param: f64) -> Result<EquilibriumPoint> {
    let j = analytic_jacobian(model, state, p)?;
    let eigs = eigenvalues(&j)?;
    let coeffs = char_coeffs(&j);
    let hurwitz = hurwitz_minors(&coeffs);
    let mut f = vec![0.0; state.len()];
    model.eval_rhs(state, p, 0.0, &mut f);
    let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(EquilibriumPoint {
        param,
        state: state.to_vec(),
        eigenvalues: eigs,
        char_coeffs: coeffs,
        hurwitz,
        stability: Stability::from_max_re(max_re),
        residual: max_abs(&f),
        polished: true,
    })
}

pub fn eigenvalues(j: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    linalg::eigenvalues(j)
}

/// Whether `j` has the arrowhead pattern of a gated membrane model: full
/// first row and column, diagonal elsewhere.
pub fn is_arrowhead(j: &DMatrix<f64>) -> bool {
    let n = j.nrows();
    (1..n).all(|r| (1..n).all(|c| r == c || j[(r, c)] == 0.0))
}

/// Characteristic coefficients of a 4×4 gated Jacobian from the closed
/// forms in the entries `F_V = J11`, `F_y = J1y`, `c_y = Jy1`, `k_y = -Jyy`.
pub fn char_coeffs_4d(j: &DMatrix<f64>) -> Result<[f64; 4]> {
    if j.nrows() != 4 || j.ncols() != 4 {
        return Err(Error::Dimension { expected: 4, got: j.nrows() });
    }
    if !is_arrowhead(j) {
        return Err(Error::Precondition("Jacobian is not of gated (arrowhead) form".into()));
    }
    let fv = j[(0, 0)];
    let (fh, fm, fn_) = (j[(0, 1)], j[(0, 2)], j[(0, 3)]);
    let (ch, cm, cn) = (j[(1, 0)], j[(2, 0)], j[(3, 0)]);
    let (kh, km, kn) = (-j[(1, 1)], -j[(2, 2)], -j[(3, 3)]);
    let (ph, pm, pn) = (ch * fh, cm * fm, cn * fn_);
    let a1 = kh + km + kn - fv;
    let a2 = kh * km + kh * kn + km * kn - fv * (kh + km + kn) - ph - pm - pn;
    let a3 = kh * km * kn - fv * (kh * km + kh * kn + km * kn) - ph * (km + kn) - pn * (kh + km) - pm * (kh + kn);
    let a4 = -kh * km * kn * fv - ph * km * kn - pm * kh * kn - pn * kh * km;
    Ok([a1, a2, a3, a4])
}

/// Characteristic coefficients of an arrowhead matrix of any size, from
/// det(λI - J) = (λ - F_V) Π(λ + k_y) - Σ c_y F_y Π_{z≠y}(λ + k_z).
pub fn char_coeffs_arrowhead(j: &DMatrix<f64>) -> Vec<f64> {
    let n = j.nrows();
    let k: Vec<f64> = (1..n).map(|i| -j[(i, i)]).collect();
    // Polynomials stored highest degree first, monic.
    let prod = |skip: Option<usize>| {
        let mut c = vec![1.0];
        for (i, &ki) in k.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let mut next = vec![0.0; c.len() + 1];
            for (d, &cd) in c.iter().enumerate() {
                next[d] += cd;
                next[d + 1] += cd * ki;
            }
            c = next;
        }
        c
    };
    let full = prod(None);
    let mut out = vec![0.0; n + 1];
    for (d, &c) in full.iter().enumerate() {
        out[d] += c;
        out[d + 1] -= j[(0, 0)] * c;
    }
    for y in 0..n - 1 {
        let w = j[(y + 1, 0)] * j[(0, y + 1)];
        if w == 0.0 {
            continue;
        }
        for (d, &c) in prod(Some(y)).iter().enumerate() {
            out[d + 2] -= w * c;
        }
    }
    out[1..].to_vec()
}

/// Characteristic coefficients of a general square matrix by the
/// Faddeev–LeVerrier recursion.
pub fn char_coeffs_generic(j: &DMatrix<f64>) -> Vec<f64> {
    let n = j.nrows();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut coeffs = Vec::with_capacity(n);
    let mut c_prev = 1.0;
    for k in 1..=n {
        m = j * &m + DMatrix::<f64>::identity(n, n) * c_prev;
        let c = -(j * &m).trace() / k as f64;
        coeffs.push(c);
        c_prev = c;
    }
    coeffs
}

/// Structural closed forms when `j` is a gated Jacobian, Faddeev–LeVerrier otherwise.
pub fn char_coeffs(j: &DMatrix<f64>) -> Vec<f64> {
    if let Ok(c) = char_coeffs_4d(j) {
        return c.to_vec();
    }
    if j.nrows() > 1 && is_arrowhead(j) {
        return char_coeffs_arrowhead(j);
    }
    char_coeffs_generic(j)
}

/// Leading principal minors of the Hurwitz matrix of
/// λ^n + a1 λ^(n-1) + ... + an.
pub fn hurwitz_matrix_minors(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let coef = |k: isize| -> f64 {
        if k == 0 {
            1.0
        } else if k < 0 || k as usize > n {
            0.0
        } else {
            a[k as usize - 1]
        }
    };
    let h = DMatrix::from_fn(n, n, |i, j| coef(2 * (j as isize + 1) - (i as isize + 1)));
    (1..=n).map(|k| h.view((0, 0), (k, k)).into_owned().determinant()).collect()
}

/// Routh–Hurwitz minors. For quartics the closed forms
/// Δ1 = a1, Δ2 = a1 a2 - a3, Δ3 = a3 Δ2, Δ4 = Δ3 - a1² a4 are used;
/// other orders use the Hurwitz-matrix minors.
pub fn hurwitz_minors(a: &[f64]) -> Vec<f64> {
    if let [a1, a2, a3, a4] = *a {
        let d1 = a1;
        let d2 = a1 * a2 - a3;
        let d3 = a3 * d2;
        let d4 = d3 - a1 * a1 * a4;
        return vec![d1, d2, d3, d4];
    }
    hurwitz_matrix_minors(a)
}

/// Stability verdict from the coefficients alone. For quartics this adds
/// a4 > 0 to the closed-form minors, since Δ4 above is the third
/// Hurwitz determinant.
pub fn hurwitz_stable(a: &[f64]) -> bool {
    let d = hurwitz_minors(a);
    let minors_ok = d.iter().all(|x| *x > 0.0);
    if a.len() == 4 {
        minors_ok && a[3] > 0.0
    } else {
        minors_ok
    }
}

/// Fold test function: the constant coefficient a_n = (-1)^n det J.
pub fn fold_test(a: &[f64]) -> f64 {
    *a.last().unwrap_or(&0.0)
}

/// Hopf test function: the Hurwitz minor Δ_{n-1} of the coefficients.
pub fn hopf_test(a: &[f64]) -> f64 {
    let n = a.len();
    if n == 4 {
        hurwitz_minors(a)[3]
    } else if n >= 2 {
        hurwitz_matrix_minors(a)[n - 2]
    } else {
        f64::NAN
    }
}

/// CSV report: `param,V_inf,<gates>,max_re_lambda,stability,a1..an,delta1..deltan`.
pub fn to_csv(points: &[EquilibriumPoint], state_names: &[String]) -> String {
    let n = state_names.len();
    let mut s = String::from("param,V_inf");
    for g in &state_names[1..] {
        let _ = write!(s, ",{g}");
    }
    s.push_str(",max_re_lambda,stability");
    for i in 1..=n {
        let _ = write!(s, ",a{i}");
    }
    for i in 1..=n {
        let _ = write!(s, ",delta{i}");
    }
    s.push('\n');
    for p in points {
        let _ = write!(s, "{}", p.param);
        for x in &p.state {
            let _ = write!(s, ",{x}");
        }
        let _ = write!(s, ",{},{}", p.max_re(), p.stability.as_str());
        for x in p.char_coeffs.iter().chain(&p.hurwitz) {
            let _ = write!(s, ",{x}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::noble::{Noble, G_L};
    use crate::model::{gate_steady, rhs};

    fn noble_at(gl: f64) -> (Noble, ParameterSet) {
        let m = Noble::new();
        let mut p = m.default_params();
        p.set_at(G_L, gl);
        (m, p)
    }

    /// Characteristic coefficients from det(λI - J) sampled at n+1 points
    /// and solved as a Vandermonde system.
    fn interpolation_oracle(j: &DMatrix<f64>) -> Vec<f64> {
        let n = j.nrows();
        let xs: Vec<f64> = (0..=n).map(|k| k as f64 - n as f64 / 2.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| (DMatrix::<f64>::identity(n, n) * x - j).determinant() - x.powi(n as i32))
            .collect();
        // Unknowns: a1..an with p(x) - x^n = sum a_k x^(n-k).
        let v = DMatrix::from_fn(n + 1, n, |r, c| xs[r].powi((n - 1 - c) as i32));
        let rhs = nalgebra::DVector::from_vec(ys);
        let sol = v.svd(true, true).solve(&rhs, 1e-14).unwrap();
        sol.iter().copied().collect()
    }

    #[test]
    fn quartic_examples() {
        let j = -DMatrix::<f64>::identity(4, 4);
        assert_eq!(char_coeffs_4d(&j).unwrap(), [4.0, 6.0, 4.0, 1.0]);
        assert_eq!(hurwitz_minors(&[4.0, 6.0, 4.0, 1.0]), vec![4.0, 20.0, 80.0, 64.0]);
        assert_eq!(hurwitz_minors(&[0.0, 1.0, 0.0, 0.0])[3], 0.0);
        assert!(hurwitz_stable(&[4.0, 6.0, 4.0, 1.0]));
        assert!(char_coeffs_4d(&DMatrix::<f64>::identity(3, 3)).is_err());
    }

    #[test]
    fn general_minors_match_closed_form_on_the_true_determinants() {
        let a = [4.0, 6.0, 4.0, 1.0];
        let g = hurwitz_matrix_minors(&a);
        let c = hurwitz_minors(&a);
        assert!((g[0] - c[0]).abs() < 1e-12);
        assert!((g[1] - c[1]).abs() < 1e-12);
        assert!((g[2] - c[3]).abs() < 1e-12);
        assert!((g[3] - a[3] * c[3]).abs() < 1e-12);
    }

    #[test]
    fn structural_paths_match_interpolation_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [4usize, 6, 10] {
            for _ in 0..50 {
                let mut j = DMatrix::<f64>::zeros(n, n);
                j[(0, 0)] = rng.gen_range(-3.0..3.0);
                for i in 1..n {
                    j[(0, i)] = rng.gen_range(-2.0..2.0);
                    j[(i, 0)] = rng.gen_range(-2.0..2.0);
                    j[(i, i)] = -rng.gen_range(0.05..3.0);
                }
                let oracle = interpolation_oracle(&j);
                let fl = char_coeffs_generic(&j);
                let ar = char_coeffs_arrowhead(&j);
                let c = char_coeffs(&j);
                for k in 0..n {
                    let scale = 1.0 + oracle[k].abs();
                    assert!((ar[k] - oracle[k]).abs() < 1e-8 * scale, "n={n} k={k}");
                    assert!((fl[k] - ar[k]).abs() < 1e-10 * (1.0 + ar[k].abs()));
                    assert!((c[k] - ar[k]).abs() < 1e-10 * (1.0 + ar[k].abs()));
                }
            }
        }
    }

    #[test]
    fn noble_stability_regimes() {
        let (m, p) = noble_at(0.4);
        let e = find_rest(&m, &p).unwrap();
        assert_eq!(e.stability, Stability::Stable);
        assert!(fold_test(&e.char_coeffs) > 0.0);
        let prod: Complex64 = e.eigenvalues.iter().product();
        assert!((fold_test(&e.char_coeffs) - prod.re).abs() < 1e-9 * prod.re.abs());
        let (m, p) = noble_at(0.075);
        let e = find_rest(&m, &p).unwrap();
        assert_eq!(e.stability, Stability::Unstable);
        assert!(!hurwitz_stable(&e.char_coeffs));
        assert!(fold_test(&e.char_coeffs) != 0.0);
    }

    #[test]
    fn equilibrium_invariants() {
        let (m, p) = noble_at(0.075);
        let e = find_rest(&m, &p).unwrap();
        assert!(e.polished);
        assert!(e.residual < RESIDUAL_TOL);
        let f = rhs(&m, &e.state, &p, 0.0).unwrap();
        assert!(f.iter().all(|x| x.abs() < 1e-10));
        for (g, name) in ["h", "m", "n"].iter().enumerate() {
            let (yinf, _) = gate_steady(&m, name, e.v(), &p).unwrap();
            assert!((e.state[g + 1] - yinf).abs() < 1e-12);
        }
        // Idempotent from its own output.
        let again = find_equilibrium_near(&m, &p, e.v()).unwrap();
        for (a, b) in e.state.iter().zip(&again.state) {
            assert!((a - b).abs() < 1e-12);
        }
        // Roots of the characteristic polynomial match the eigenvalues.
        let from_eigs = linalg::char_poly_from_eigs(&e.eigenvalues);
        for (a, b) in from_eigs.iter().zip(&e.char_coeffs) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn equilibrium_at_gate_rows_follow_steady_state_derivative() {
        let (m, p) = noble_at(0.075);
        let e = find_rest(&m, &p).unwrap();
        let j = analytic_jacobian(&m, &e.state, &p).unwrap();
        for g in 0..3 {
            let r = m.rates(g, e.v(), &p);
            assert!((j[(g + 1, 0)] - r.dsteady() / r.tau()).abs() < 1e-12);
        }
    }

    #[test]
    fn no_sign_change_is_not_found() {
        let (m, p) = noble_at(0.075);
        let e = find_equilibrium(&m, &p, (-10.0, 0.0)).unwrap_err();
        assert!(matches!(e, Error::NotFound(_)));
    }

    #[test]
    fn csv_columns() {
        let (m, p) = noble_at(0.4);
        let mut e = find_rest(&m, &p).unwrap();
        e.param = 0.4;
        let csv = to_csv(&[e], m.state_names());
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "param,V_inf,h,m,n,max_re_lambda,stability,a1,a2,a3,a4,delta1,delta2,delta3,delta4"
        );
        assert_eq!(lines.next().unwrap().split(',').count(), 15);
    }
}

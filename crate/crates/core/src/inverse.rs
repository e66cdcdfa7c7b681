//! Exact inversion, potentials, block formulas and the sub-Markov kernel.
//!
//! [`invert_oracle`] is the ground truth for every structural claim in the
//! crate. It clears denominators row by row and runs fraction-free
//! Gauss-Jordan elimination over big integers, so no intermediate value is
//! ever rounded. The block formulas in [`schur_blocks`] are checked against it.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::builder::{restrict, UMatrix};
use crate::error::{Error, Result};
use crate::matrix::RationalMatrix;
use crate::rational::{format_rational, to_f64, Rational};

/// Exact inverse of a square rational matrix.
///
/// Writes `M = D⁻¹ N` with `D` diagonal and `N` integral, inverts `N` by
/// fraction-free Gauss-Jordan elimination (every division by the previous
/// pivot is exact), and returns `N⁻¹ D`.
pub fn invert_oracle(m: &RationalMatrix) -> Result<RationalMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cannot invert a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let row_scale: Vec<BigInt> = (0..n)
        .map(|i| {
            m.row(i)
                .iter()
                .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
        })
        .collect();
    let width = 2 * n;
    let mut a: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            let mut row: Vec<BigInt> = m
                .row(i)
                .iter()
                .map(|v| v.numer() * (&row_scale[i] / v.denom()))
                .collect();
            row.extend((0..n).map(|j| {
                if i == j {
                    BigInt::one()
                } else {
                    BigInt::zero()
                }
            }));
            row
        })
        .collect();

    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot = (k..n).find(|&r| !a[r][k].is_zero()).ok_or_else(|| {
            Error::Singular(format!(
                "no nonzero pivot in column {} of a {n}x{n} matrix",
                k + 1
            ))
        })?;
        a.swap(k, pivot);
        let (before, rest) = a.split_at_mut(k);
        let (pivot_row, after) = rest.split_first_mut().expect("row k exists");
        let pkk = pivot_row[k].clone();
        for row in before.iter_mut().chain(after.iter_mut()) {
            let rik = std::mem::take(&mut row[k]);
            for j in 0..width {
                if j == k {
                    continue;
                }
                let num = &pkk * &row[j] - &rik * &pivot_row[j];
                debug_assert!(
                    (&num % &prev).is_zero(),
                    "fraction-free step must divide exactly"
                );
                row[j] = num / &prev;
            }
        }
        prev = pkk;
    }

    // Every diagonal entry now holds the same pivot, so N⁻¹ = right half / pivot.
    Ok(RationalMatrix::from_fn(n, n, |i, j| {
        Rational::new(a[i][n + j].clone() * &row_scale[j], a[i][i].clone())
    }))
}

/// Row and column sums of an inverse: `mu = M⁻¹1`, `nu = (M⁻¹)ᵗ1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialReport {
    pub mu: Vec<Rational>,
    pub nu: Vec<Rational>,
    pub mu_bar: Rational,
    pub nu_bar: Rational,
}

pub fn potentials(inverse: &RationalMatrix) -> PotentialReport {
    let mu = inverse.row_sums();
    let nu = inverse.col_sums();
    let mu_bar: Rational = mu.iter().sum();
    let nu_bar: Rational = nu.iter().sum();
    PotentialReport {
        mu,
        nu,
        mu_bar,
        nu_bar,
    }
}

/// Total mass `1ᵗ M⁻¹ 1` of a block.
pub fn mass(m: &RationalMatrix) -> Result<Rational> {
    Ok(invert_oracle(m)?.total())
}

/// The four blocks of `U⁻¹` for the split of the leaves at the root into the
/// minus side `J` and the plus side `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchurBlocks {
    pub c: RationalMatrix,
    pub d: RationalMatrix,
    pub e: RationalMatrix,
    pub f: RationalMatrix,
    pub alpha_root: Rational,
    pub mu_j: Vec<Rational>,
    pub nu_j: Vec<Rational>,
    pub nu_k: Vec<Rational>,
    pub mu_bar_j: Rational,
    /// `1 − alpha_root · mu_bar_j`, positive for nonsingular `U`.
    pub denominator: Rational,
}

impl SchurBlocks {
    pub fn assemble(&self) -> RationalMatrix {
        RationalMatrix::from_blocks(&self.c, &self.d, &self.e, &self.f).expect("block shapes agree")
    }
}

pub fn schur_blocks(u: &UMatrix) -> Result<SchurBlocks> {
    let (minus, plus) = u
        .tree
        .children(u.tree.root())
        .ok_or_else(|| Error::DimensionMismatch("block split needs at least two leaves".into()))?;
    let uj = restrict(u, minus).entries;
    let uk = restrict(u, plus).entries;
    let uj_inv = invert_oracle(&uj)?;
    let uk_inv = invert_oracle(&uk)?;
    let alpha = u.annotation.alpha(u.tree.root()).clone();

    let pj = potentials(&uj_inv);
    let pk = potentials(&uk_inv);
    let denominator = Rational::one() - &alpha * &pj.mu_bar;
    if denominator.is_zero() {
        return Err(Error::Singular("1 - alpha_I * mu_bar_J vanishes".into()));
    }
    let mut e_k = vec![Rational::zero(); uk.rows()];
    *e_k.last_mut().expect("K is nonempty") = Rational::one();

    let c = uj_inv.add(&RationalMatrix::outer(&pj.mu, &pj.nu).scale(&(&alpha / &denominator)))?;
    let d = RationalMatrix::outer(&pj.mu, &pk.nu).scale(&(-&alpha / &denominator));
    let e = RationalMatrix::outer(&e_k, &pj.nu).scale(&(-Rational::one() / &denominator));
    let f = uk_inv
        .add(&RationalMatrix::outer(&e_k, &pk.nu).scale(&(&alpha * &pj.mu_bar / &denominator)))?;

    Ok(SchurBlocks {
        c,
        d,
        e,
        f,
        alpha_root: alpha,
        mu_j: pj.mu,
        nu_j: pj.nu,
        nu_k: pk.nu,
        mu_bar_j: pj.mu_bar,
        denominator,
    })
}

/// Outcome of checking the recursive form of `mu` at the root split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MuRecursion {
    pub mu: Vec<Rational>,
    pub predicted_mu: Vec<Rational>,
    pub mu_bar: Rational,
    pub mu_bar_k: Rational,
    pub inverse_last_diagonal: Rational,
    pub mismatches: Vec<String>,
}

impl MuRecursion {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Checks `mu_I = (c_J mu_J ; mu_K − mu_bar_J c_J e_K)` with
/// `c_J = (1 − alpha_I mu_bar_K)/(1 − alpha_I mu_bar_J)`, and
/// `mu_bar_I = mu_bar_K = 1/U_nn`, exactly.
pub fn verify_mu_recursion(u: &UMatrix) -> Result<MuRecursion> {
    let (minus, plus) = u
        .tree
        .children(u.tree.root())
        .ok_or_else(|| Error::DimensionMismatch("block split needs at least two leaves".into()))?;
    let full = potentials(&invert_oracle(&u.entries)?);
    let pj = potentials(&invert_oracle(&restrict(u, minus).entries)?);
    let pk = potentials(&invert_oracle(&restrict(u, plus).entries)?);
    let alpha = u.annotation.alpha(u.tree.root());
    let denom = Rational::one() - alpha * &pj.mu_bar;
    if denom.is_zero() {
        return Err(Error::Singular("1 - alpha_I * mu_bar_J vanishes".into()));
    }
    let factor = (Rational::one() - alpha * &pk.mu_bar) / &denom;
    let mut predicted: Vec<Rational> = pj.mu.iter().map(|m| m * &factor).collect();
    let k = pk.mu.len();
    predicted.extend(pk.mu.iter().enumerate().map(|(idx, m)| {
        if idx + 1 == k {
            m - &pj.mu_bar * &factor
        } else {
            m.clone()
        }
    }));

    let n = u.size();
    let unn = &u.entries[(n - 1, n - 1)];
    let inv_unn = Rational::one() / unn;
    let mut mismatches = Vec::new();
    for (idx, (got, want)) in full.mu.iter().zip(&predicted).enumerate() {
        if got != want {
            mismatches.push(format!(
                "mu[{}] = {} but the block recursion gives {}",
                idx + 1,
                format_rational(got),
                format_rational(want)
            ));
        }
    }
    if full.mu_bar != pk.mu_bar {
        mismatches.push(format!(
            "mu_bar = {} differs from mu_bar_K = {}",
            format_rational(&full.mu_bar),
            format_rational(&pk.mu_bar)
        ));
    }
    if full.mu_bar != inv_unn {
        mismatches.push(format!(
            "mu_bar = {} differs from 1/U_nn = {}",
            format_rational(&full.mu_bar),
            format_rational(&inv_unn)
        ));
    }
    Ok(MuRecursion {
        mu: full.mu,
        predicted_mu: predicted,
        mu_bar: full.mu_bar,
        mu_bar_k: pk.mu_bar,
        inverse_last_diagonal: inv_unn,
        mismatches,
    })
}

/// `P = E − η⁻¹ U⁻¹`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    pub p: RationalMatrix,
    pub eta: Rational,
    /// `η(U)`, the largest diagonal entry of `U⁻¹`.
    pub eta_min: Rational,
}

impl Kernel {
    pub fn is_nonnegative(&self) -> bool {
        self.p.is_nonnegative()
    }

    /// `1ᵗP ≤ 1ᵗ`.
    pub fn is_column_substochastic(&self) -> bool {
        self.p.col_sums().iter().all(|s| *s <= Rational::one())
    }
}

/// Builds the kernel; `eta` defaults to `η(U)`.
pub fn kernel(inverse: &RationalMatrix, eta: Option<&Rational>) -> Result<Kernel> {
    if !inverse.is_square() || inverse.rows() == 0 {
        return Err(Error::DimensionMismatch(
            "kernel needs a nonempty square matrix".into(),
        ));
    }
    let eta_min = inverse.diagonal().into_iter().max().expect("nonempty");
    let eta = eta.cloned().unwrap_or_else(|| eta_min.clone());
    if eta < eta_min || !eta.is_positive() {
        return Err(Error::EtaTooSmall {
            eta: format_rational(&eta),
            eta_min: format_rational(&eta_min),
        });
    }
    let n = inverse.rows();
    let p = RationalMatrix::identity(n).sub(&inverse.scale(&(Rational::one() / &eta)))?;
    Ok(Kernel { p, eta, eta_min })
}

/// Partial sums `S_M = Σ_{m≤M} Pᵐ` compared against `ηU`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannReport {
    /// `‖ηU − S_M‖_∞` for `M = 0..=max_terms`, as floats.
    pub gaps: Vec<f64>,
    /// `S_M ≤ S_{M+1}` entrywise for every step checked.
    pub monotone: bool,
    /// `S_M ≤ ηU` entrywise for every step checked.
    pub bounded: bool,
    /// `ηU − S_M = P^{M+1} ηU` for every step checked.
    pub residual_identity: bool,
    pub failures: Vec<String>,
}

impl NeumannReport {
    pub fn ok(&self) -> bool {
        self.monotone && self.bounded && self.residual_identity
    }
}

/// Integer matrix `a` and positive `d` with `m = a / d`.
fn integer_form(m: &RationalMatrix) -> (Vec<Vec<BigInt>>, BigInt) {
    let d = m
        .entries()
        .fold(BigInt::one(), |acc, (_, v)| acc.lcm(v.denom()));
    let a = (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .map(|v| v.numer() * (&d / v.denom()))
                .collect()
        })
        .collect();
    (a, d)
}

fn int_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![BigInt::zero(); m]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                if !b[l][j].is_zero() {
                    out[i][j] += &a[i][l] * &b[l][j];
                }
            }
        }
    }
    out
}

/// Checks the partial sums exactly. With `P = A/d` and `ηU = B/e`, every
/// step is carried over the integers scaled by `e d^M`.
pub fn neumann_check(u: &UMatrix, kernel: &Kernel, max_terms: usize) -> Result<NeumannReport> {
    let n = u.size();
    if kernel.p.rows() != n {
        return Err(Error::DimensionMismatch(
            "kernel and matrix sizes differ".into(),
        ));
    }
    let (a, d) = integer_form(&kernel.p);
    let (b, e) = integer_form(&u.entries.scale(&kernel.eta));
    let identity = |k: usize| -> Vec<Vec<BigInt>> {
        (0..k)
            .map(|i| (0..k).map(|j| BigInt::from((i == j) as u8)).collect())
            .collect()
    };
    let mut power = identity(n);
    let mut sum = identity(n);
    let mut scale = BigInt::one();
    let mut report = NeumannReport {
        gaps: Vec::with_capacity(max_terms + 1),
        monotone: true,
        bounded: true,
        residual_identity: true,
        failures: Vec::new(),
    };
    for m in 0..=max_terms {
        // e d^m (ηU − S_m)
        let gap: Vec<Vec<BigInt>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| &b[i][j] * &scale - &e * &sum[i][j])
                    .collect()
            })
            .collect();
        let norm = gap
            .iter()
            .map(|row| row.iter().map(BigInt::abs).sum::<BigInt>())
            .max()
            .unwrap_or_default();
        report.gaps.push(to_f64(&Rational::new(norm, &e * &scale)));
        if gap.iter().flatten().any(Signed::is_negative) {
            report.bounded = false;
            report
                .failures
                .push(format!("S_{m} exceeds eta*U somewhere"));
        }
        let next_power = int_mul(&power, &a);
        let residual = int_mul(&next_power, &b);
        if residual
            .iter()
            .flatten()
            .zip(gap.iter().flatten())
            .any(|(r, g)| *r != &d * g)
        {
            report.residual_identity = false;
            report
                .failures
                .push(format!("eta*U - S_{m} differs from P^{} eta*U", m + 1));
        }
        if m == max_terms {
            break;
        }
        // S_{m+1} − S_m = P^{m+1}
        if next_power.iter().flatten().any(Signed::is_negative) {
            report.monotone = false;
            report
                .failures
                .push(format!("S_{} is not above S_{m}", m + 1));
        }
        for (srow, prow) in sum.iter_mut().zip(&next_power) {
            for (s, p) in srow.iter_mut().zip(prow) {
                *s = &*s * &d + p;
            }
        }
        scale *= &d;
        power = next_power;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_umatrix, example_instance};
    use crate::rational::{frac, int};

    fn example_inverse() -> RationalMatrix {
        RationalMatrix::from_integers(
            &[
                vec![8, -4, 0, 0, 0, -1],
                vec![-8, 8, 0, 0, 0, 0],
                vec![0, 0, 4, 0, 0, -2],
                vec![0, 0, -4, 4, 0, 0],
                vec![0, 0, 0, 0, 8, -6],
                vec![0, -4, 0, -4, -8, 11],
            ],
            8,
        )
    }

    fn example_u() -> UMatrix {
        let (t, a) = example_instance();
        build_umatrix(&t, &a).unwrap()
    }

    #[test]
    fn oracle_on_example() {
        assert_eq!(
            invert_oracle(&example_u().entries).unwrap(),
            example_inverse()
        );
    }

    #[test]
    fn oracle_small_cases() {
        assert_eq!(
            invert_oracle(&RationalMatrix::identity(3)).unwrap(),
            RationalMatrix::identity(3)
        );
        let m = RationalMatrix::from_integers(&[vec![2, 1], vec![3, 3]], 1);
        let want = RationalMatrix::from_integers(&[vec![3, -1], vec![-3, 2]], 3);
        assert_eq!(invert_oracle(&m).unwrap(), want);
        let fractional = RationalMatrix::from_integers(&[vec![1, 2], vec![3, 8]], 4);
        let inv = invert_oracle(&fractional).unwrap();
        assert_eq!(fractional.mul(&inv).unwrap(), RationalMatrix::identity(2));
    }

    #[test]
    fn oracle_needs_row_swaps() {
        let m = RationalMatrix::from_integers(&[vec![0, 1, 2], vec![1, 0, 3], vec![4, -3, 8]], 1);
        let inv = invert_oracle(&m).unwrap();
        assert_eq!(m.mul(&inv).unwrap(), RationalMatrix::identity(3));
    }

    #[test]
    fn oracle_detects_singular() {
        let m = RationalMatrix::from_integers(&[vec![1, 2], vec![2, 4]], 1);
        assert!(matches!(invert_oracle(&m), Err(Error::Singular(_))));
        assert!(matches!(
            invert_oracle(&RationalMatrix::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn potentials_of_example() {
        let p = potentials(&example_inverse());
        assert_eq!(
            p.mu,
            vec![
                frac(3, 8),
                int(0),
                frac(1, 4),
                int(0),
                frac(1, 4),
                frac(-5, 8)
            ]
        );
        assert_eq!(
            p.nu,
            vec![int(0), int(0), int(0), int(0), int(0), frac(1, 4)]
        );
        assert_eq!(p.mu_bar, frac(1, 4));
        assert_eq!(p.nu_bar, p.mu_bar);
    }

    #[test]
    fn potentials_trivial() {
        let p = potentials(&RationalMatrix::identity(4));
        assert_eq!(p.mu, vec![int(1); 4]);
        assert_eq!(p.mu_bar, int(4));
        let p = potentials(&RationalMatrix::from_integers(&[vec![1]], 5));
        assert_eq!(p.mu, vec![frac(1, 5)]);
        assert_eq!(p.nu, vec![frac(1, 5)]);
    }

    #[test]
    fn schur_blocks_on_example() {
        let s = schur_blocks(&example_u()).unwrap();
        assert_eq!(s.assemble(), example_inverse());
        assert_eq!(
            s.c,
            RationalMatrix::from_integers(&[vec![2, -1], vec![-2, 2]], 2)
        );
        assert_eq!(s.mu_bar_j, frac(1, 3));
        assert!(s.denominator.is_positive());
    }

    #[test]
    fn schur_blocks_two_leaf() {
        let (t, a) = two_leaf(2, 1, 3);
        let u = build_umatrix(&t, &a).unwrap();
        let s = schur_blocks(&u).unwrap();
        assert_eq!(s.mu_bar_j, frac(1, 2));
        assert_eq!(s.denominator, frac(1, 2));
        assert_eq!(s.assemble(), invert_oracle(&u.entries).unwrap());
    }

    fn two_leaf(
        d1: i64,
        root: i64,
        d2: i64,
    ) -> (crate::tree::DyadicTree, crate::builder::Annotation) {
        use crate::tree::{DyadicTree, NodeSpec};
        let t = DyadicTree::new(
            &[
                NodeSpec::internal("I", "1", "2"),
                NodeSpec::leaf("1"),
                NodeSpec::leaf("2"),
            ],
            "I",
            None,
        )
        .unwrap();
        let a = crate::builder::Annotation::from_vecs(
            &t,
            vec![int(root), int(d1), int(d2)],
            vec![int(root), int(d1), int(d2)],
        )
        .unwrap();
        (t, a)
    }

    #[test]
    fn mu_recursion_example_and_two_leaf() {
        let r = verify_mu_recursion(&example_u()).unwrap();
        assert!(r.ok(), "{:?}", r.mismatches);
        assert_eq!(r.mu_bar, frac(1, 4));
        assert_eq!(r.mu_bar_k, frac(1, 4));
        assert_eq!(r.predicted_mu[..2], [frac(3, 8), int(0)]);

        let (t, a) = two_leaf(2, 1, 3);
        let r = verify_mu_recursion(&build_umatrix(&t, &a).unwrap()).unwrap();
        assert!(r.ok());
        assert_eq!(r.mu, vec![frac(2, 3), frac(-1, 3)]);
        assert_eq!(r.mu_bar, frac(1, 3));
    }

    #[test]
    fn kernel_on_example() {
        let k = kernel(&example_inverse(), None).unwrap();
        assert_eq!(k.eta, frac(11, 8));
        assert_eq!(k.p[(1, 0)], frac(8, 11));
        assert_eq!(k.p[(0, 2)], int(0));
        assert!(k.is_nonnegative());
        assert!(k.is_column_substochastic());
        // Row n of P sums above one: only the column inequality holds.
        assert!(k.p.row_sums()[5] > int(1));
    }

    #[test]
    fn kernel_identity_and_eta_too_small() {
        let k = kernel(&RationalMatrix::identity(3), Some(&int(1))).unwrap();
        assert_eq!(k.p, RationalMatrix::zeros(3, 3));
        assert!(matches!(
            kernel(&example_inverse(), Some(&int(1))),
            Err(Error::EtaTooSmall { .. })
        ));
    }

    #[test]
    fn neumann_on_example() {
        let u = example_u();
        let k = kernel(&invert_oracle(&u.entries).unwrap(), None).unwrap();
        let r = neumann_check(&u, &k, 20).unwrap();
        assert!(r.ok(), "{:?}", r.failures);
        assert!(r.gaps.windows(2).skip(1).all(|w| w[1] < w[0]));
    }

    #[test]
    fn neumann_one_by_one_is_exact() {
        use crate::tree::{DyadicTree, NodeSpec};
        let t = DyadicTree::new(&[NodeSpec::leaf("x")], "x", None).unwrap();
        let a = crate::builder::Annotation::from_vecs(&t, vec![int(3)], vec![int(3)]).unwrap();
        let u = build_umatrix(&t, &a).unwrap();
        let k = kernel(&invert_oracle(&u.entries).unwrap(), None).unwrap();
        assert_eq!(k.eta, frac(1, 3));
        let r = neumann_check(&u, &k, 3).unwrap();
        assert!(r.ok());
        assert!(r.gaps.iter().all(|g| *g == 0.0));
    }
}

//! Finite matrix-product chain in mixed canonical form.
//!
//! Sites left of `center` are left isometries, sites right of it are right
//! isometries and the center tensor carries unit Frobenius norm; the removed
//! norm is accumulated in `log_norm`. Every bond crossed by the center gets
//! its exact Schmidt values stored in `lambdas`. Both the pure-state MPS
//! (`d = 2`) and the vectorized density operator (`d = 4`) use this type.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::tensor::{gemm, gemm_op, svd_slice, DenseTensor, Op, Scalar, Truncation};
use crate::trotter::Parity;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Dir {
    Right,
    Left,
}

/// Squared norm below which a state is treated as annihilated.
const VANISHING: f64 = 1e-28;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Chain<T> {
    /// `[χ_left, d, χ_right]` per site.
    pub sites: Vec<DenseTensor<T>>,
    /// Normalized Schmidt values per interior bond.
    pub lambdas: Vec<Vec<f64>>,
    pub center: usize,
    pub d: usize,
    pub log_norm: f64,
    /// Whether every entry of `lambdas` matches the current state.
    pub fresh: bool,
    /// Local dual vector (the trace functional for density operators). When
    /// set, two-site truncation keeps every component seen by this vector on
    /// all sites but one, so single-site expectations survive truncation.
    pub protect: Option<Vec<T>>,
}

pub(crate) struct Split<T> {
    pub left: Vec<T>,
    pub right: Vec<T>,
    pub k: usize,
    pub lambdas: Vec<f64>,
    pub norm: f64,
    pub truncation: f64,
}

/// SVD split of a `rows x cols` block; the normalized singular values are
/// absorbed into the right factor for `Dir::Right` and into the left one for
/// `Dir::Left`.
pub(crate) fn split<T: Scalar>(
    rows: usize,
    cols: usize,
    theta: &[T],
    trunc: Truncation,
    dir: Dir,
) -> Result<Split<T>> {
    let svd = svd_slice(rows, cols, theta, trunc.chi_max, trunc.cutoff)?;
    let kept2: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    if kept2 < VANISHING {
        return Err(Error::VanishingNorm(kept2.sqrt()));
    }
    let norm = kept2.sqrt();
    let total = (kept2 + svd.truncation_weight * svd.truncation_weight).sqrt();
    let lambdas: Vec<f64> = svd.singular_values.iter().map(|s| s / norm).collect();
    let k = lambdas.len();
    let mut left = svd.left.data;
    let mut right = svd.right.data;
    match dir {
        Dir::Right => {
            for (row, &l) in right.chunks_exact_mut(cols).zip(&lambdas) {
                for v in row {
                    *v = v.scale(l);
                }
            }
        }
        Dir::Left => {
            for row in left.chunks_exact_mut(k) {
                for (v, &l) in row.iter_mut().zip(&lambdas) {
                    *v = v.scale(l);
                }
            }
        }
    }
    Ok(Split {
        left,
        right,
        k,
        lambdas,
        norm,
        truncation: svd.truncation_weight / total,
    })
}

/// Truncating split of `theta[(a, s1), (s2, c)]` that leaves untouched every
/// component reachable through the environments `el` (over `a`) and `er`
/// (over `c`).
///
/// With `P` projecting rows onto `conj(el) ⊗ C^d` and `Q` projecting columns
/// onto `C^d ⊗ er`, `theta = Pθ + (1-P)θQ + (1-P)θ(1-Q)`. The first two
/// terms have rank at most `d` each and are kept exactly; only the last one
/// is truncated, to `chi_max - 2d` values. Every contraction of `theta` with
/// `el` on the left, or with `er` on the right, is therefore preserved.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conserving_split<T: Scalar>(
    a: usize,
    e: usize,
    d: usize,
    theta: &[T],
    el: &[T],
    er: &[T],
    trunc: Truncation,
    dir: Dir,
) -> Result<Split<T>> {
    let (rows, cols) = (a * d, d * e);
    let unit = |v: &[T]| -> Option<Vec<T>> {
        let n = v.iter().map(|x| x.abs2()).sum::<f64>().sqrt();
        (n > 1e-150 && n.is_finite()).then(|| v.iter().map(|x| x.scale(1.0 / n)).collect())
    };
    let (Some(l), Some(r)) = (unit(el), unit(er)) else {
        return split(rows, cols, theta, trunc, dir);
    };
    // kept = Pθ
    let mut kept = vec![T::zero(); rows * cols];
    for s in 0..d {
        let mut coef = vec![T::zero(); cols];
        for (al, lv) in l.iter().enumerate() {
            let row = &theta[(al * d + s) * cols..(al * d + s + 1) * cols];
            for (c, x) in coef.iter_mut().zip(row) {
                *c += *lv * *x;
            }
        }
        for (al, lv) in l.iter().enumerate() {
            let lc = lv.conj();
            for (k, c) in kept[(al * d + s) * cols..(al * d + s + 1) * cols].iter_mut().zip(&coef) {
                *k = lc * *c;
            }
        }
    }
    let mut rest: Vec<T> = theta.iter().zip(&kept).map(|(t, k)| *t - *k).collect();
    // kept += (1-P)θQ, rest = (1-P)θ(1-Q)
    for (row, krow) in rest.chunks_exact_mut(cols).zip(kept.chunks_exact_mut(cols)) {
        for s in 0..d {
            let blk = &mut row[s * e..(s + 1) * e];
            let mut g = T::zero();
            for (x, rv) in blk.iter().zip(&r) {
                g += *x * *rv;
            }
            for ((x, k), rv) in blk.iter_mut().zip(&mut krow[s * e..(s + 1) * e]).zip(&r) {
                let p = g * rv.conj();
                *x -= p;
                *k += p;
            }
        }
    }
    let total2: f64 = theta.iter().map(|x| x.abs2()).sum();
    let room = trunc.chi_max.saturating_sub(2 * d);
    let mut dropped2: f64 = rest.iter().map(|x| x.abs2()).sum();
    if room > 0 && dropped2 > 0.0 {
        let svd = svd_slice(rows, cols, &rest, room, trunc.cutoff)?;
        let k = svd.singular_values.len();
        let mut us = svd.left.data;
        for row in us.chunks_exact_mut(k) {
            for (v, &sv) in row.iter_mut().zip(&svd.singular_values) {
                *v = v.scale(sv);
            }
        }
        let low = gemm(rows, k, cols, &us, &svd.right.data);
        for (x, y) in kept.iter_mut().zip(&low) {
            *x += *y;
        }
        dropped2 = svd.truncation_weight * svd.truncation_weight;
    }
    let kept2: f64 = kept.iter().map(|x| x.abs2()).sum();
    let mut s = split(rows, cols, &kept, trunc, dir)?;
    if total2 > 0.0 {
        let t = s.truncation * s.truncation * kept2;
        s.truncation = ((dropped2 + t) / total2).sqrt();
    }
    Ok(s)
}

/// Applies a `d² x d²` gate to the physical pair of `theta[a, s1, s2, c]`.
pub(crate) fn apply_pair_gate<T: Scalar>(theta: &[T], gate: &[T], dd: usize, chi_r: usize) -> Vec<T> {
    let block = dd * chi_r;
    let mut out = Vec::with_capacity(theta.len());
    for chunk in theta.chunks_exact(block) {
        out.extend(gemm(dd, dd, chi_r, gate, chunk));
    }
    out
}

/// `M'[a, s', b] = Σ_s op[s', s] M[a, s, b]`.
pub(crate) fn apply_site_op<T: Scalar>(m: &[T], op: &[T], d: usize, chi_r: usize) -> Vec<T> {
    let block = d * chi_r;
    let mut out = Vec::with_capacity(m.len());
    for chunk in m.chunks_exact(block) {
        out.extend(gemm(d, d, chi_r, op, chunk));
    }
    out
}

fn identity<T: Scalar>(n: usize) -> Vec<T> {
    crate::linalg::identity(n)
}

impl<T: Scalar> Chain<T> {
    /// Product state from one local vector per site.
    pub fn product(d: usize, vectors: &[Vec<T>]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Shape("chain needs at least one site".into()));
        }
        let mut sites = Vec::with_capacity(vectors.len());
        let mut log_norm = 0.0;
        for v in vectors {
            if v.len() != d {
                return Err(Error::Shape(alloc::format!(
                    "local vector of length {} for dimension {d}",
                    v.len()
                )));
            }
            let n2: f64 = v.iter().map(|x| x.abs2()).sum();
            if n2 < VANISHING {
                return Err(Error::VanishingNorm(n2.sqrt()));
            }
            let n = n2.sqrt();
            log_norm += n.ln();
            let data = v.iter().map(|x| x.scale(1.0 / n)).collect();
            sites.push(DenseTensor::new(vec![1, d, 1], data)?);
        }
        Ok(Self {
            lambdas: vec![vec![1.0]; vectors.len() - 1],
            sites,
            center: 0,
            d,
            log_norm,
            fresh: true,
            protect: None,
        })
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn bond_dim(&self, bond: usize) -> usize {
        self.sites[bond].dims[2]
    }

    pub fn max_bond(&self) -> usize {
        (0..self.n().saturating_sub(1))
            .map(|b| self.bond_dim(b))
            .max()
            .unwrap_or(1)
    }

    pub fn check_bond(&self, bond: usize) -> Result<()> {
        if bond + 1 >= self.n() {
            Err(Error::InvalidBond {
                bond,
                n_bonds: self.n().saturating_sub(1),
            })
        } else {
            Ok(())
        }
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n() {
            Err(Error::InvalidSite {
                site,
                n_sites: self.n(),
            })
        } else {
            Ok(())
        }
    }

    fn absorb_norm(&mut self, norm: f64) {
        self.log_norm += norm.ln();
    }

    fn move_right(&mut self, trunc: Truncation) -> Result<f64> {
        let c = self.center;
        let d = self.d;
        let [a, _, b] = dims3(&self.sites[c]);
        let s = split(a * d, b, &self.sites[c].data, trunc, Dir::Right)?;
        let [_, _, e] = dims3(&self.sites[c + 1]);
        let next = gemm(s.k, b, d * e, &s.right, &self.sites[c + 1].data);
        self.sites[c] = DenseTensor::new(vec![a, d, s.k], s.left)?;
        self.sites[c + 1] = DenseTensor::new(vec![s.k, d, e], next)?;
        self.lambdas[c] = s.lambdas;
        self.center = c + 1;
        self.absorb_norm(s.norm);
        Ok(s.truncation)
    }

    fn move_left(&mut self, trunc: Truncation) -> Result<f64> {
        let c = self.center;
        let d = self.d;
        let [a, _, b] = dims3(&self.sites[c]);
        let s = split(a, d * b, &self.sites[c].data, trunc, Dir::Left)?;
        let [x, _, _] = dims3(&self.sites[c - 1]);
        let prev = gemm(x * d, a, s.k, &self.sites[c - 1].data, &s.left);
        self.sites[c] = DenseTensor::new(vec![s.k, d, b], s.right)?;
        self.sites[c - 1] = DenseTensor::new(vec![x, d, s.k], prev)?;
        self.lambdas[c - 1] = s.lambdas;
        self.center = c - 1;
        self.absorb_norm(s.norm);
        Ok(s.truncation)
    }

    /// Moves the orthogonality center, refreshing the Schmidt values of every
    /// bond it crosses.
    pub fn move_to(&mut self, site: usize, trunc: Truncation) -> Result<()> {
        self.check_site(site)?;
        while self.center < site {
            self.move_right(trunc)?;
        }
        while self.center > site {
            self.move_left(trunc)?;
        }
        Ok(())
    }

    /// Sweeps the center across the whole chain so all Schmidt values are
    /// exact again. The center ends at one of the chain ends.
    pub fn refresh(&mut self, trunc: Truncation) -> Result<()> {
        let last = self.n() - 1;
        if self.center * 2 >= last {
            self.move_to(last, trunc)?;
            self.move_to(0, trunc)?;
        } else {
            self.move_to(0, trunc)?;
            self.move_to(last, trunc)?;
        }
        self.fresh = true;
        Ok(())
    }

    /// Applies a `d² x d²` gate on sites `bond, bond + 1` and re-splits.
    /// Returns the discarded weight relative to the full two-site norm.
    pub fn two_site(&mut self, bond: usize, gate: &[T], dir: Dir, trunc: Truncation) -> Result<f64> {
        self.check_bond(bond)?;
        let d = self.d;
        if gate.len() != d * d * d * d {
            return Err(Error::Shape(alloc::format!(
                "gate of {} entries for local dimension {d}",
                gate.len()
            )));
        }
        let target = if self.center <= bond { bond } else { bond + 1 };
        self.move_to(target, trunc)?;
        let [a, _, m] = dims3(&self.sites[bond]);
        let [_, _, e] = dims3(&self.sites[bond + 1]);
        let theta = gemm(a * d, m, d * e, &self.sites[bond].data, &self.sites[bond + 1].data);
        let theta = apply_pair_gate(&theta, gate, d * d, e);
        let s = match &self.protect {
            Some(v) if a * d > trunc.chi_max && d * e > trunc.chi_max => {
                let (el, er) = self.trace_envs(bond, v);
                conserving_split(a, e, d, &theta, &el, &er, trunc, dir)?
            }
            _ => split(a * d, d * e, &theta, trunc, dir)?,
        };
        self.sites[bond] = DenseTensor::new(vec![a, d, s.k], s.left)?;
        self.sites[bond + 1] = DenseTensor::new(vec![s.k, d, e], s.right)?;
        self.lambdas[bond] = s.lambdas;
        self.center = match dir {
            Dir::Right => bond + 1,
            Dir::Left => bond,
        };
        self.absorb_norm(s.norm);
        Ok(s.truncation)
    }

    /// Contractions of `v` over every site left of `bond` and right of
    /// `bond + 1`.
    fn trace_envs(&self, bond: usize, v: &[T]) -> (Vec<T>, Vec<T>) {
        let mut l = vec![T::one()];
        for m in &self.sites[..bond] {
            let [a, _, b] = dims3(m);
            l = gemm(1, a, b, &l, &Self::site_matrix(m, v));
        }
        let mut r = vec![T::one()];
        for m in self.sites[bond + 2..].iter().rev() {
            let [a, _, b] = dims3(m);
            r = gemm(a, b, 1, &Self::site_matrix(m, v), &r);
        }
        (l, r)
    }

    /// Applies a `d x d` operator on one site. Returns the norm factor it
    /// introduced (already moved into `log_norm`).
    pub fn one_site(&mut self, site: usize, op: &[T], trunc: Truncation) -> Result<f64> {
        self.move_to(site, trunc)?;
        let d = self.d;
        let [_, _, b] = dims3(&self.sites[site]);
        let mut data = apply_site_op(&self.sites[site].data, op, d, b);
        let n2: f64 = data.iter().map(|v| v.abs2()).sum();
        if n2 < VANISHING {
            return Err(Error::VanishingNorm(n2.sqrt()));
        }
        let n = n2.sqrt();
        for v in &mut data {
            *v = v.scale(1.0 / n);
        }
        self.sites[site].data = data;
        self.absorb_norm(n);
        Ok(n)
    }

    /// `L'[b, b'] = Σ L[a, a'] M[a, s, b] conj(M[a', s, b'])`.
    fn left_step(l: &[T], m: &DenseTensor<T>) -> Vec<T> {
        let [a, d, b] = dims3(m);
        let t1 = gemm_op(a, a, d * b, l, Op::T, &m.data, Op::N);
        gemm_op(b, a * d, b, &t1, Op::T, &m.data, Op::C)
    }

    /// `R'[a, a'] = Σ M[a, s, b] R[b, b'] conj(M[a', s, b'])`.
    fn right_step(r: &[T], m: &DenseTensor<T>) -> Vec<T> {
        let [a, d, b] = dims3(m);
        let t1 = gemm(a * d, b, b, &m.data, r);
        gemm_op(a, d * b, a, &t1, Op::N, &m.data, Op::H)
    }

    /// `ρ[s, s'] = Σ L[a, a'] M[a, s, b] R[b, b'] conj(M[a', s', b'])`.
    fn density(l: &[T], m: &DenseTensor<T>, r: &[T]) -> Vec<T> {
        let [a, d, b] = dims3(m);
        let x = gemm_op(a, a, d * b, l, Op::T, &m.data, Op::N);
        let y = gemm(a * d, b, b, &x, r);
        let mut rho = vec![T::zero(); d * d];
        for ai in 0..a {
            for s in 0..d {
                let yrow = &y[(ai * d + s) * b..(ai * d + s + 1) * b];
                for sp in 0..d {
                    let mrow = &m.data[(ai * d + sp) * b..(ai * d + sp + 1) * b];
                    let mut acc = T::zero();
                    for (yv, mv) in yrow.iter().zip(mrow) {
                        acc += *yv * mv.conj();
                    }
                    rho[s * d + sp] += acc;
                }
            }
        }
        rho
    }

    /// Reduced density matrix `ρ[s, s']` of one site, normalized to unit
    /// trace. Requires a valid mixed canonical gauge.
    pub fn reduced_density(&self, site: usize) -> Result<Vec<T>> {
        self.check_site(site)?;
        let c = self.center;
        let m = &self.sites[site];
        let [a, _, b] = dims3(m);
        let rho = if site == c {
            Self::density(&identity(a), m, &identity(b))
        } else if site < c {
            let mut r = identity(self.sites[c].dims[2]);
            for k in (site + 1..=c).rev() {
                r = Self::right_step(&r, &self.sites[k]);
            }
            Self::density(&identity(a), m, &r)
        } else {
            let mut l = identity(self.sites[c].dims[0]);
            for k in c..site {
                l = Self::left_step(&l, &self.sites[k]);
            }
            Self::density(&l, m, &identity(b))
        };
        Ok(normalize_density(rho, self.d))
    }

    /// All single-site reduced density matrices in one pass.
    pub fn reduced_densities(&self) -> Vec<Vec<T>> {
        let n = self.n();
        let c = self.center;
        let mut out = vec![Vec::new(); n];
        let [ca, _, cb] = dims3(&self.sites[c]);
        out[c] = Self::density(&identity(ca), &self.sites[c], &identity(cb));
        let mut r = identity(cb);
        for site in (0..c).rev() {
            r = Self::right_step(&r, &self.sites[site + 1]);
            let a = self.sites[site].dims[0];
            out[site] = Self::density(&identity(a), &self.sites[site], &r);
        }
        let mut l = identity(ca);
        for site in c + 1..n {
            l = Self::left_step(&l, &self.sites[site - 1]);
            let b = self.sites[site].dims[2];
            out[site] = Self::density(&l, &self.sites[site], &identity(b));
        }
        out.into_iter().map(|rho| normalize_density(rho, self.d)).collect()
    }

    /// Dense vector of the represented state, site 0 most significant.
    pub fn to_dense(&self) -> Vec<T> {
        let d = self.d;
        let first = &self.sites[0];
        let mut rows = d;
        let mut cols = first.dims[2];
        let mut v = first.data.clone();
        for m in &self.sites[1..] {
            let [_, _, e] = dims3(m);
            v = gemm(rows, cols, d * e, &v, &m.data);
            rows *= d;
            cols = e;
        }
        let scale = self.log_norm.exp();
        v.into_iter().map(|x| x.scale(scale)).collect()
    }

    /// `Σ_s v[s] M[:, s, :]` as an `a x b` matrix.
    fn site_matrix(m: &DenseTensor<T>, v: &[T]) -> Vec<T> {
        let [a, d, b] = dims3(m);
        let mut out = vec![T::zero(); a * b];
        for ai in 0..a {
            for (s, &vs) in v.iter().enumerate().take(d) {
                if vs == T::zero() {
                    continue;
                }
                let src = &m.data[(ai * d + s) * b..(ai * d + s + 1) * b];
                for (o, x) in out[ai * b..(ai + 1) * b].iter_mut().zip(src) {
                    *o += *x * vs;
                }
            }
        }
        out
    }

    /// Contracts every physical index with the given local vectors, without
    /// the `log_norm` factor.
    pub fn contract_vectors(&self, vectors: &[&[T]]) -> T {
        let mut l = vec![T::one()];
        for (m, v) in self.sites.iter().zip(vectors) {
            let [a, _, b] = dims3(m);
            l = gemm(1, a, b, &l, &Self::site_matrix(m, v));
        }
        l[0]
    }

    /// For each site `i`, the contraction with `op` on `i` and `background`
    /// everywhere else (without the `log_norm` factor).
    pub fn contract_local(&self, background: &[T], op: &[T]) -> Vec<T> {
        let n = self.n();
        let bg: Vec<Vec<T>> = self
            .sites
            .iter()
            .map(|m| Self::site_matrix(m, background))
            .collect();
        let mut lefts = Vec::with_capacity(n);
        let mut l = vec![T::one()];
        for (m, g) in self.sites.iter().zip(&bg) {
            lefts.push(l.clone());
            let [a, _, b] = dims3(m);
            l = gemm(1, a, b, &l, g);
        }
        let mut out = vec![T::zero(); n];
        let mut r = vec![T::one()];
        for i in (0..n).rev() {
            let m = &self.sites[i];
            let [a, _, b] = dims3(m);
            let lm = gemm(1, a, b, &lefts[i], &Self::site_matrix(m, op));
            out[i] = gemm(1, b, 1, &lm, &r)[0];
            r = gemm(a, b, 1, &bg[i], &r);
        }
        out
    }
}

impl<T: Scalar> Chain<T> {
    /// Applies one gate per bond of `parity`, sweeping away from the chain
    /// end nearest to the center. Returns the summed discarded weight.
    pub fn apply_layer<'g>(
        &mut self,
        parity: Parity,
        mut gate_for: impl FnMut(usize) -> &'g [T],
        trunc: Truncation,
    ) -> Result<f64>
    where
        T: 'g,
    {
        let n = self.n();
        let mut total = 0.0;
        if self.center * 2 < n - 1 {
            for b in parity.bonds(n) {
                total += self.two_site(b, gate_for(b), Dir::Right, trunc)?;
            }
        } else {
            for b in parity.bonds(n).rev() {
                total += self.two_site(b, gate_for(b), Dir::Left, trunc)?;
            }
        }
        Ok(total)
    }

    /// For each bond, the `d x d` block obtained by contracting `background`
    /// on every site except the bond's two sites (without `log_norm`).
    pub fn contract_pairs(&self, background: &[T]) -> Vec<Vec<T>> {
        let n = self.n();
        let d = self.d;
        let bg: Vec<Vec<T>> = self
            .sites
            .iter()
            .map(|m| Self::site_matrix(m, background))
            .collect();
        let mut lefts = Vec::with_capacity(n);
        let mut l = vec![T::one()];
        for (m, g) in self.sites.iter().zip(&bg) {
            lefts.push(l.clone());
            let [a, _, b] = dims3(m);
            l = gemm(1, a, b, &l, g);
        }
        let mut rights = vec![Vec::new(); n];
        let mut r = vec![T::one()];
        for i in (0..n).rev() {
            rights[i] = r.clone();
            let [a, _, b] = dims3(&self.sites[i]);
            r = gemm(a, b, 1, &bg[i], &r);
        }
        let mut out = Vec::with_capacity(n.saturating_sub(1));
        for b in 0..n.saturating_sub(1) {
            let [a1, _, m] = dims3(&self.sites[b]);
            let [_, _, e] = dims3(&self.sites[b + 1]);
            // row vector over (s1, m)
            let lm = gemm(1, a1, d * m, &lefts[b], &self.sites[b].data);
            // column vector over (m, s2)
            let mr = gemm(m * d, e, 1, &self.sites[b + 1].data, &rights[b + 1]);
            let mut block = vec![T::zero(); d * d];
            for s1 in 0..d {
                for s2 in 0..d {
                    let mut acc = T::zero();
                    for k in 0..m {
                        acc += lm[s1 * m + k] * mr[k * d + s2];
                    }
                    block[s1 * d + s2] = acc;
                }
            }
            out.push(block);
        }
        out
    }
}

pub(crate) fn dims3<T>(m: &DenseTensor<T>) -> [usize; 3] {
    [m.dims[0], m.dims[1], m.dims[2]]
}

fn normalize_density<T: Scalar>(mut rho: Vec<T>, d: usize) -> Vec<T> {
    let tr: f64 = (0..d).map(|i| rho[i * d + i].re()).sum();
    if tr > 0.0 {
        for v in &mut rho {
            *v = v.scale(1.0 / tr);
        }
    }
    rho
}

//! Vacuum expectations of Wick-ordered operator products
//!
//! <Omega, F_0 W_1 F_1 ... W_L F_L Omega> with each W_l contracting p_l
//! created and q_l annihilated internal photons against a kernel, evaluated
//! for every output column of external momenta and every output r-node at
//! once. Kernel data and the F factors come from a [`WickSource`].

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use num_complex::Complex64;

use crate::fock::DiscreteFockSpace;
use crate::grid::RadialGrid;
use crate::kernel_space::{project_support, symmetrize, Kernel, KernelSequence};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Index (m, p, n, q) of one factor: m external and p internal creation
/// slots, n external and q internal annihilation slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorIndex {
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub q: usize,
}

impl FactorIndex {
    pub fn new(m: usize, p: usize, n: usize, q: usize) -> Self {
        FactorIndex { m, p, n, q }
    }

    /// Kernel sector (m + p, n + q) the factor reads from.
    pub fn sector(&self) -> (usize, usize) {
        (self.m + self.p, self.n + self.q)
    }

    /// Binomial multiplicity C(m+p, p) C(n+q, q).
    pub fn multiplicity(&self) -> f64 {
        binomial(self.m + self.p, self.p) * binomial(self.n + self.q, self.q)
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// A kernel slot: an external output-grid node or an internal mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Ext(usize),
    Int(usize),
}

/// Everything the engine needs about one series.
pub trait WickSource: Sync {
    /// Dimension of the atomic factor (1 when there is none).
    fn atom_dim(&self) -> usize;
    /// Scale s multiplying output r and external momenta in all arguments.
    fn scale(&self) -> f64;
    /// Output r-nodes.
    fn r_nodes(&self) -> &[f64];
    /// External momenta in output units.
    fn ext_momenta(&self) -> &[f64];
    fn int_momenta(&self) -> &[f64];
    fn int_amplitudes(&self) -> &[f64];
    /// Whether the sector (a, b) may appear inside a factor.
    fn has_sector(&self, a: usize, b: usize) -> bool;
    /// Writes the kernel of sector (a, b) with the given slots at each
    /// argument into `out` as atom matrices: out[(ir * d + i) * d + j].
    fn kernel(&self, sector: (usize, usize), cre: &[Slot], ann: &[Slot], args: &[f64], out: &mut [Complex64]);
    /// F_0 and F_L at field energy x.
    fn outer(&self, x: f64) -> f64;
    /// F_l for 0 < l < L at field energy x and atomic level `atom`.
    fn inner(&self, atom: usize, x: f64) -> Complex64;
    /// Upper bound on the operator norm of the factor W with these indices.
    fn factor_bound(&self, f: FactorIndex) -> f64;
    /// Upper bound on |F_l|.
    fn inner_bound(&self) -> f64;
    fn outer_bound(&self) -> f64 {
        1.0
    }
    /// Atom matrix M of a sector whose kernel is M times a product of slot
    /// values, independent of the argument.
    fn product_matrix(&self, _sector: (usize, usize)) -> Option<DMatrix<Complex64>> {
        None
    }
    /// Slot value of a product-form kernel.
    fn slot_value(&self, _create: bool, _slot: Slot) -> Complex64 {
        ONE
    }
}

/// All factor tuples of length `l` with the given external totals whose
/// internal photons can be created and annihilated in order.
pub fn tuples<S: WickSource + ?Sized>(src: &S, big_m: usize, big_n: usize, l: usize, max_slots: usize) -> Vec<Vec<FactorIndex>> {
    let mut singles = Vec::new();
    for a in 0..=max_slots {
        for b in 0..=(max_slots - a) {
            if a + b == 0 || !src.has_sector(a, b) {
                continue;
            }
            for p in 0..=a {
                for q in 0..=b {
                    singles.push(FactorIndex::new(a - p, p, b - q, q));
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(l);
    fn rec(
        singles: &[FactorIndex],
        l: usize,
        left_m: usize,
        left_n: usize,
        cur: &mut Vec<FactorIndex>,
        out: &mut Vec<Vec<FactorIndex>>,
    ) {
        if cur.len() == l {
            if left_m == 0 && left_n == 0 && balanced(cur) {
                out.push(cur.clone());
            }
            return;
        }
        for f in singles {
            if f.m <= left_m && f.n <= left_n {
                cur.push(*f);
                rec(singles, l, left_m - f.m, left_n - f.n, cur, out);
                cur.pop();
            }
        }
    }
    rec(&singles, l, big_m, big_n, &mut cur, &mut out);
    out
}

/// Internal photon bookkeeping, processed from the right: never annihilate
/// more than present, end at the vacuum.
pub fn balanced(t: &[FactorIndex]) -> bool {
    let mut n: i64 = 0;
    for f in t.iter().rev() {
        n -= f.q as i64;
        if n < 0 {
            return false;
        }
        n += f.p as i64;
    }
    n == 0
}

/// Largest number of internal photons present between factors.
pub fn internal_cap(t: &[FactorIndex]) -> usize {
    let mut n = 0usize;
    let mut best = 0;
    for f in t.iter().rev() {
        n -= f.q;
        best = best.max(n);
        n += f.p;
        best = best.max(n);
    }
    best
}

/// Certified upper bound on |V| for one tuple.
pub fn tuple_bound<S: WickSource + ?Sized>(src: &S, t: &[FactorIndex]) -> f64 {
    let mut b = src.outer_bound() * src.outer_bound();
    for f in t {
        b *= src.factor_bound(*f);
    }
    b * src.inner_bound().powi(t.len() as i32 - 1)
}

/// One precomputed ladder step: target state, bosonic amplitude, modes in
/// order of application.
#[derive(Clone, Debug)]
struct Step {
    target: usize,
    amp: f64,
    modes: Vec<usize>,
}

/// Internal Fock space with cached ordered creation and annihilation
/// tuples.
pub struct InternalSpace {
    pub space: DiscreteFockSpace,
    ann: Vec<Vec<Vec<Step>>>,
    cre: Vec<Vec<Vec<Step>>>,
}

fn ladder(space: &DiscreteFockSpace, state: usize, n: usize, create: bool) -> Vec<Step> {
    let mut cur = vec![(space.basis[state].clone(), 1.0, Vec::new())];
    for _ in 0..n {
        let mut next = Vec::new();
        for (occ, amp, modes) in &cur {
            for j in 0..space.n_modes {
                let mut o: Vec<u8> = occ.clone();
                let f = if create {
                    o[j] += 1;
                    (o[j] as f64).sqrt()
                } else {
                    if o[j] == 0 {
                        continue;
                    }
                    let f = (o[j] as f64).sqrt();
                    o[j] -= 1;
                    f
                };
                if create && o.iter().map(|&x| x as usize).sum::<usize>() > space.n_ph_max {
                    continue;
                }
                let mut ms: Vec<usize> = modes.clone();
                ms.push(j);
                next.push((o, amp * f, ms));
            }
        }
        cur = next;
    }
    cur.into_iter()
        .map(|(o, amp, modes)| Step {
            target: space.index_of(&o).expect("ladder stays in the space"),
            amp,
            modes,
        })
        .collect()
}

impl InternalSpace {
    pub fn new(energies: &[f64], cap: usize, max_step: usize) -> Self {
        let space = DiscreteFockSpace::new(energies, cap);
        let mut ann = Vec::new();
        let mut cre = Vec::new();
        for n in 0..=max_step {
            ann.push((0..space.dim).map(|s| ladder(&space, s, n, false)).collect());
            cre.push((0..space.dim).map(|s| ladder(&space, s, n, true)).collect());
        }
        InternalSpace { space, ann, cre }
    }
}

type StateVec = BTreeMap<usize, Vec<Complex64>>;

/// Sparse internal operator: per source state, (target, coefficient).
type SparseOp = Vec<Vec<(usize, Complex64)>>;

/// Internal contraction operators and atom matrices of a product-form
/// source.
struct ProductOps {
    ops: BTreeMap<(usize, usize), SparseOp>,
    mats: BTreeMap<(usize, usize), DMatrix<Complex64>>,
}

impl ProductOps {
    fn new<S: WickSource + ?Sized>(src: &S, internal: &InternalSpace) -> Option<Self> {
        let max_step = internal.ann.len() - 1;
        let mut mats = BTreeMap::new();
        for a in 0..=max_step {
            for b in 0..=(max_step - a) {
                if a + b > 0 && src.has_sector(a, b) {
                    mats.insert((a, b), src.product_matrix((a, b))?);
                }
            }
        }
        let amp = src.int_amplitudes();
        let weight = |create: bool, modes: &[usize]| -> Complex64 {
            modes
                .iter()
                .map(|&m| src.slot_value(create, Slot::Int(m)) * amp[m])
                .product()
        };
        let mut ops = BTreeMap::new();
        for p in 0..=max_step {
            for q in 0..=(max_step - p) {
                let op: SparseOp = (0..internal.space.dim)
                    .map(|state| {
                        let mut row: BTreeMap<usize, Complex64> = BTreeMap::new();
                        for an in &internal.ann[q][state] {
                            let wa = weight(false, &an.modes) * an.amp;
                            for cr in &internal.cre[p][an.target] {
                                *row.entry(cr.target).or_insert(ZERO) += wa * weight(true, &cr.modes) * cr.amp;
                            }
                        }
                        row.into_iter().filter(|(_, c)| *c != ZERO).collect()
                    })
                    .collect();
                ops.insert((p, q), op);
            }
        }
        Some(ProductOps { ops, mats })
    }
}

/// Evaluation context shared by the tuples of one (M, N) output sector.
pub struct Engine<'a, S: WickSource + ?Sized> {
    pub src: &'a S,
    pub internal: &'a InternalSpace,
    product: Option<ProductOps>,
}

struct TupleCtx<'t> {
    t: &'t [FactorIndex],
    /// Sums of external annihilation momenta per factor.
    ann_sum: Vec<f64>,
    /// Annihilation external indices per factor.
    ann_idx: Vec<Vec<usize>>,
    ann_flat: usize,
    n_ann_cols: usize,
}

impl<'a, S: WickSource + ?Sized> Engine<'a, S> {
    pub fn new(src: &'a S, internal: &'a InternalSpace) -> Self {
        Engine {
            src,
            internal,
            product: ProductOps::new(src, internal),
        }
    }

    /// V for one tuple at every output column and r-node, laid out as
    /// out[col * n_r + ir] with creation slots before annihilation slots.
    pub fn evaluate(&self, t: &[FactorIndex]) -> Vec<Complex64> {
        let n_k = self.src.ext_momenta().len();
        let n_r = self.src.r_nodes().len();
        let big_m: usize = t.iter().map(|f| f.m).sum();
        let big_n: usize = t.iter().map(|f| f.n).sum();
        let n_ann_cols = n_k.pow(big_n as u32);
        let mut out = vec![ZERO; n_k.pow((big_m + big_n) as u32) * n_r];
        let mut idx = vec![0usize; big_n];
        for ann_flat in 0..n_ann_cols {
            let mut c = ann_flat;
            for s in (0..big_n).rev() {
                idx[s] = c % n_k;
                c /= n_k;
            }
            let mut ann_idx = Vec::with_capacity(t.len());
            let mut ann_sum = Vec::with_capacity(t.len());
            let mut pos = 0;
            for f in t {
                let block: Vec<usize> = idx[pos..pos + f.n].to_vec();
                ann_sum.push(block.iter().map(|&i| self.src.ext_momenta()[i]).sum());
                ann_idx.push(block);
                pos += f.n;
            }
            let ctx = TupleCtx {
                t,
                ann_sum,
                ann_idx,
                ann_flat,
                n_ann_cols,
            };
            self.run(&ctx, &mut out);
        }
        out
    }

    fn run(&self, ctx: &TupleCtx, out: &mut [Complex64]) {
        let src = self.src;
        let d = src.atom_dim();
        let n_r = src.r_nodes().len();
        let s = src.scale();
        let l = ctx.t.len();
        let total_ann: f64 = ctx.ann_sum.iter().sum();
        let mut start = vec![ZERO; d * n_r];
        for (ir, &r) in src.r_nodes().iter().enumerate() {
            start[ir] = Complex64::new(src.outer(s * (r + total_ann)), 0.0);
        }
        let mut v = StateVec::new();
        v.insert(0, start);
        self.descend(ctx, l, v, 0.0, 0, 1, out);
    }

    /// Applies W_l (1-based) for every creation choice of factor l, then
    /// F_{l-1}, and recurses leftwards.
    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        ctx: &TupleCtx,
        l: usize,
        v: StateVec,
        cre_right: f64,
        cre_flat: usize,
        cre_mult: usize,
        out: &mut [Complex64],
    ) {
        let src = self.src;
        let f = ctx.t[l - 1];
        let n_k = src.ext_momenta().len();
        let n_r = src.r_nodes().len();
        let d = src.atom_dim();
        let s = src.scale();
        let ann_left: f64 = ctx.ann_sum[..l - 1].iter().sum();
        let r_w = ann_left + cre_right;
        let combos = n_k.pow(f.m as u32);
        let mut kidx = vec![0usize; f.m];
        for block in 0..combos {
            let mut c = block;
            for sidx in (0..f.m).rev() {
                kidx[sidx] = c % n_k;
                c /= n_k;
            }
            let w = self.apply_w(ctx, l, f, &kidx, &v, s * r_w);
            if w.is_empty() {
                continue;
            }
            let cre_sum: f64 = kidx.iter().map(|&i| src.ext_momenta()[i]).sum();
            let cre_right_next = cre_right + cre_sum;
            let cre_flat_next = cre_flat + block * cre_mult;
            let cre_mult_next = cre_mult * combos;
            if l == 1 {
                if let Some(vals) = w.get(&0) {
                    let col = cre_flat_next * ctx.n_ann_cols + ctx.ann_flat;
                    for (ir, &r) in src.r_nodes().iter().enumerate() {
                        let f0 = src.outer(s * (r + cre_right_next));
                        out[col * n_r + ir] += vals[ir] * f0;
                    }
                }
                continue;
            }
            let shift = ann_left + cre_right_next;
            let mut w = w;
            for (&state, vals) in w.iter_mut() {
                let hf = self.internal.space.hf(state);
                for a in 0..d {
                    for (ir, &r) in src.r_nodes().iter().enumerate() {
                        vals[a * n_r + ir] *= src.inner(a, hf + s * (r + shift));
                    }
                }
            }
            w.retain(|_, vals| vals.iter().any(|x| *x != ZERO));
            if w.is_empty() {
                continue;
            }
            self.descend(ctx, l - 1, w, cre_right_next, cre_flat_next, cre_mult_next, out);
        }
    }

    fn apply_w(&self, ctx: &TupleCtx, l: usize, f: FactorIndex, kidx: &[usize], v: &StateVec, shift: f64) -> StateVec {
        let src = self.src;
        let d = src.atom_dim();
        let n_r = src.r_nodes().len();
        if let Some(prod) = &self.product {
            return self.apply_product(prod, ctx, l, f, kidx, v);
        }
        let s = src.scale();
        let amp = src.int_amplitudes();
        let mut out = StateVec::new();
        let mut cre: Vec<Slot> = kidx.iter().map(|&i| Slot::Ext(i)).collect();
        cre.extend(std::iter::repeat(Slot::Int(0)).take(f.p));
        let mut ann: Vec<Slot> = ctx.ann_idx[l - 1].iter().map(|&i| Slot::Ext(i)).collect();
        ann.extend(std::iter::repeat(Slot::Int(0)).take(f.q));
        let mut args = vec![0.0; n_r];
        let mut kv = vec![ZERO; n_r * d * d];
        for (&state, vals) in v {
            for an in &self.internal.ann[f.q][state] {
                let mid = an.target;
                let hf = self.internal.space.hf(mid);
                for (a, &r) in args.iter_mut().zip(src.r_nodes()) {
                    *a = hf + s * r + shift;
                }
                // modes are in application order; slot order is a(X_1)..a(X_q)
                // with X_q applied first.
                for (j, &m) in an.modes.iter().rev().enumerate() {
                    ann[f.n + j] = Slot::Int(m);
                }
                let a_amp: f64 = an.amp * an.modes.iter().map(|&m| amp[m]).product::<f64>();
                for cr in &self.internal.cre[f.p][mid] {
                    for (j, &m) in cr.modes.iter().rev().enumerate() {
                        cre[f.m + j] = Slot::Int(m);
                    }
                    let c_amp: f64 = cr.amp * cr.modes.iter().map(|&m| amp[m]).product::<f64>();
                    src.kernel(f.sector(), &cre, &ann, &args, &mut kv);
                    let coef = a_amp * c_amp;
                    let target = out.entry(cr.target).or_insert_with(|| vec![ZERO; d * n_r]);
                    for ir in 0..n_r {
                        for i in 0..d {
                            let mut acc = ZERO;
                            for j in 0..d {
                                acc += kv[(ir * d + i) * d + j] * vals[j * n_r + ir];
                            }
                            target[i * n_r + ir] += acc * coef;
                        }
                    }
                }
            }
        }
        out.retain(|_, vals| vals.iter().any(|x| *x != ZERO));
        out
    }
}

impl<S: WickSource + ?Sized> Engine<'_, S> {
    fn apply_product(&self, prod: &ProductOps, ctx: &TupleCtx, l: usize, f: FactorIndex, kidx: &[usize], v: &StateVec) -> StateVec {
        let src = self.src;
        let d = src.atom_dim();
        let n_r = src.r_nodes().len();
        let mut ext = ONE;
        for &i in kidx {
            ext *= src.slot_value(true, Slot::Ext(i));
        }
        for &i in &ctx.ann_idx[l - 1] {
            ext *= src.slot_value(false, Slot::Ext(i));
        }
        let mut out = StateVec::new();
        if ext == ZERO {
            return out;
        }
        let mat = &prod.mats[&f.sector()] * ext;
        let op = &prod.ops[&(f.p, f.q)];
        let mut mv = vec![ZERO; d * n_r];
        for (&state, vals) in v {
            if op[state].is_empty() {
                continue;
            }
            mv.iter_mut().for_each(|x| *x = ZERO);
            for i in 0..d {
                for j in 0..d {
                    let m = mat[(i, j)];
                    if m == ZERO {
                        continue;
                    }
                    for ir in 0..n_r {
                        mv[i * n_r + ir] += m * vals[j * n_r + ir];
                    }
                }
            }
            for &(target, coef) in &op[state] {
                let t = out.entry(target).or_insert_with(|| vec![ZERO; d * n_r]);
                for (a, b) in t.iter_mut().zip(&mv) {
                    *a += coef * b;
                }
            }
        }
        out.retain(|_, vals| vals.iter().any(|x| *x != ZERO));
        out
    }
}

/// Options of a truncated series sum.
#[derive(Clone, Debug)]
pub struct SeriesOptions {
    pub l_max: usize,
    /// Largest number of slots of a kernel entering one factor.
    pub max_slots: usize,
    /// Output sectors kept: M + N <= m_max.
    pub m_max: usize,
    /// Tuples of output arity >= 1 whose weighted bound is below this are
    /// skipped and their bound is added to the certificate.
    pub skip_tol: f64,
    pub xi: f64,
    /// Prefactor of the output sector as a function of M + N.
    pub arity_factor: Vec<f64>,
}

impl SeriesOptions {
    fn prefactor(&self, arity: usize) -> f64 {
        self.arity_factor.get(arity).copied().unwrap_or(*self.arity_factor.last().unwrap())
    }
}

/// Raw series sums per output sector with their certificates.
#[derive(Clone, Debug, Default)]
pub struct SeriesSums {
    /// (M, N) -> values laid out as [col * n_r + ir], prefactor included.
    pub sums: BTreeMap<(usize, usize), Vec<Complex64>>,
    /// Weighted bound of the skipped tuples.
    pub skipped: f64,
    /// Weighted bound of the tuples with M + N > m_max, L <= l_max.
    pub discarded: f64,
    /// Weighted bound of all kept-sector terms with L > l_max.
    pub tail: f64,
    /// Growth ratio of the series bound per extra factor.
    pub ratio: f64,
    /// Weighted bound of the evaluated terms per order L (index L - 1).
    pub order_bounds: Vec<f64>,
    pub evaluated: usize,
}

impl SeriesSums {
    /// Total certified bound on what the truncation dropped.
    pub fn certificate(&self) -> f64 {
        self.skipped + self.discarded + self.tail
    }
}

fn single_factors<S: WickSource + ?Sized>(src: &S, max_slots: usize) -> Vec<FactorIndex> {
    let mut out = Vec::new();
    for a in 0..=max_slots {
        for b in 0..=(max_slots - a) {
            if a + b == 0 || !src.has_sector(a, b) {
                continue;
            }
            for p in 0..=a {
                for q in 0..=b {
                    out.push(FactorIndex::new(a - p, p, b - q, q));
                }
            }
        }
    }
    out
}

/// Sums sign * multiplicity * V over all tuples with L <= l_max and output
/// arity <= m_max, and bounds everything left out.
pub fn series<S: WickSource + ?Sized>(src: &S, internal: &InternalSpace, opts: &SeriesOptions) -> SeriesSums {
    let engine = Engine::new(src, internal);
    let n_r = src.r_nodes().len();
    let n_k = src.ext_momenta().len();
    let mut out = SeriesSums {
        order_bounds: vec![0.0; opts.l_max],
        ..Default::default()
    };
    for arity in 0..=opts.m_max {
        for big_m in 0..=arity {
            let big_n = arity - big_m;
            out.sums
                .insert((big_m, big_n), vec![ZERO; n_k.pow(arity as u32) * n_r]);
        }
    }
    let singles = single_factors(src, opts.max_slots);
    let inner = src.inner_bound();
    for l in 1..=opts.l_max {
        let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
        let mut all = Vec::new();
        let mut cur = Vec::with_capacity(l);
        fn rec(singles: &[FactorIndex], l: usize, cur: &mut Vec<FactorIndex>, out: &mut Vec<Vec<FactorIndex>>) {
            if cur.len() == l {
                if balanced(cur) {
                    out.push(cur.clone());
                }
                return;
            }
            for f in singles {
                cur.push(*f);
                rec(singles, l, cur, out);
                cur.pop();
            }
        }
        rec(&singles, l, &mut cur, &mut all);
        for t in all {
            let big_m: usize = t.iter().map(|f| f.m).sum();
            let big_n: usize = t.iter().map(|f| f.n).sum();
            let arity = big_m + big_n;
            let mult: f64 = t.iter().map(|f| f.multiplicity()).product();
            let weight = opts.prefactor(arity) * opts.xi.powi(-(arity as i32));
            let bound = weight * mult * tuple_bound(src, &t);
            if arity > opts.m_max {
                out.discarded += bound;
                continue;
            }
            if arity > 0 && bound < opts.skip_tol {
                out.skipped += bound;
                continue;
            }
            out.order_bounds[l - 1] += bound;
            let v = engine.evaluate(&t);
            out.evaluated += 1;
            let c = sign * mult * opts.prefactor(arity);
            let acc = out.sums.get_mut(&(big_m, big_n)).unwrap();
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b * c;
            }
        }
    }
    // Bound of all kept-sector terms beyond l_max: sum over tuples of
    // length L with at most m_max external slots, by dynamic programming
    // over the external slot count, with one inner factor per W.
    let e_max = opts.m_max;
    let mut per_e = vec![0.0; e_max + 1];
    for f in &singles {
        let e = f.m + f.n;
        if e <= e_max {
            per_e[e] += f.multiplicity() * src.factor_bound(*f) * inner;
        }
    }
    out.ratio = per_e[0];
    let mut t_l = vec![0.0; e_max + 1];
    t_l[0] = 1.0;
    let outer2 = src.outer_bound() * src.outer_bound();
    let mut tail = 0.0;
    let mut last = 0.0;
    let far = opts.l_max + 400;
    for l in 1..=far {
        let mut next = vec![0.0; e_max + 1];
        for (e, &a) in t_l.iter().enumerate() {
            for (e2, &b) in per_e.iter().enumerate() {
                if e + e2 <= e_max {
                    next[e + e2] += a * b;
                }
            }
        }
        t_l = next;
        if l > opts.l_max {
            let term: f64 = t_l
                .iter()
                .enumerate()
                .map(|(e, &v)| v * opts.prefactor(e) * opts.xi.powi(-(e as i32)))
                .sum::<f64>()
                * outer2
                / inner.max(f64::MIN_POSITIVE);
            tail += term;
            last = term;
        }
    }
    if out.ratio < 1.0 {
        tail += last * out.ratio / (1.0 - out.ratio);
    } else {
        tail = f64::INFINITY;
    }
    out.tail = tail;
    out
}

/// Certificate and diagnostics of a series evaluation over all z.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SeriesReport {
    pub tail_bound: f64,
    pub skipped: f64,
    pub discarded: f64,
    pub l_tail: f64,
    pub ratio: f64,
    pub order_bounds: Vec<f64>,
    pub tuples_evaluated: usize,
    pub parity_defect: f64,
}

impl SeriesReport {
    pub fn absorb(&mut self, s: &SeriesSums, parity: f64) {
        self.skipped = self.skipped.max(s.skipped);
        self.discarded = self.discarded.max(s.discarded);
        self.l_tail = self.l_tail.max(s.tail);
        self.ratio = self.ratio.max(s.ratio);
        self.tail_bound = self.tail_bound.max(s.certificate());
        if self.order_bounds.len() < s.order_bounds.len() {
            self.order_bounds.resize(s.order_bounds.len(), 0.0);
        }
        for (a, b) in self.order_bounds.iter_mut().zip(&s.order_bounds) {
            *a = a.max(*b);
        }
        self.tuples_evaluated += s.evaluated;
        self.parity_defect = self.parity_defect.max(parity);
    }
}

/// Converts a raw sum laid out [col * n_r + ir] into a kernel.
pub fn kernel_from_sum(m: usize, n: usize, grid: &RadialGrid, sum: &[Complex64]) -> Kernel {
    let mut w = Kernel::zeros(m, n, grid);
    let cols = w.n_cols();
    let n_r = w.n_r;
    for col in 0..cols {
        for ir in 0..n_r {
            w.values[ir * cols + col] = sum[col * n_r + ir];
        }
    }
    w.refresh_derivative(grid);
    w
}

/// Builds the kernel sequence from series sums: symmetrises, projects on
/// the support, checks that odd sectors vanish, and adds `w00_base`.
pub fn assemble_sequence(
    sums: &SeriesSums,
    grid: &RadialGrid,
    xi: f64,
    w00_base: Kernel,
) -> (KernelSequence, f64) {
    let mut seq = KernelSequence::new(xi);
    let mut parity: f64 = 0.0;
    let mut w00 = w00_base;
    for (&(m, n), sum) in &sums.sums {
        if m + n == 0 {
            w00.add_scaled(&kernel_from_sum(0, 0, grid, sum), Complex64::new(1.0, 0.0));
            continue;
        }
        let w = kernel_from_sum(m, n, grid, sum);
        if (m + n) % 2 == 1 {
            parity = parity.max(w.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
            continue;
        }
        let w = project_support(&symmetrize(&w), grid);
        if w.values.iter().any(|v| *v != ZERO) {
            seq.insert(w);
        }
    }
    seq.insert(w00);
    seq.tail_bound = sums.certificate();
    (seq, parity)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar toy source with product kernels u(k) per slot times c(arg).
    struct Toy {
        r: Vec<f64>,
        k: Vec<f64>,
        amp: Vec<f64>,
    }

    fn slot_val(k: &[f64], s: Slot) -> f64 {
        match s {
            Slot::Ext(i) | Slot::Int(i) => 1.0 + k[i],
        }
    }

    impl WickSource for Toy {
        fn atom_dim(&self) -> usize {
            1
        }
        fn scale(&self) -> f64 {
            1.0
        }
        fn r_nodes(&self) -> &[f64] {
            &self.r
        }
        fn ext_momenta(&self) -> &[f64] {
            &self.k
        }
        fn int_momenta(&self) -> &[f64] {
            &self.k
        }
        fn int_amplitudes(&self) -> &[f64] {
            &self.amp
        }
        fn has_sector(&self, a: usize, b: usize) -> bool {
            a + b <= 2
        }
        fn kernel(&self, sector: (usize, usize), cre: &[Slot], ann: &[Slot], args: &[f64], out: &mut [Complex64]) {
            let mut p = if sector.0 > sector.1 { 0.5 } else { 1.0 };
            for &s in cre.iter().chain(ann) {
                p *= slot_val(&self.k, s);
            }
            for (o, a) in out.iter_mut().zip(args) {
                *o = Complex64::new(p / (1.0 + a), 0.1 * p);
            }
        }
        fn outer(&self, x: f64) -> f64 {
            1.0 / (1.0 + x)
        }
        fn inner(&self, _atom: usize, x: f64) -> Complex64 {
            Complex64::new(1.0 / (2.0 + x), 0.0)
        }
        fn factor_bound(&self, _f: FactorIndex) -> f64 {
            1.0
        }
        fn inner_bound(&self) -> f64 {
            0.5
        }
    }

    #[test]
    fn tuple_enumeration_respects_balance() {
        let toy = Toy {
            r: vec![0.0],
            k: vec![0.3, 0.6],
            amp: vec![0.5, 0.4],
        };
        for t in tuples(&toy, 0, 0, 2, 2) {
            assert!(balanced(&t));
            assert_eq!(t[1].q, 0);
        }
        assert!(tuples(&toy, 0, 0, 1, 2).is_empty());
        assert_eq!(internal_cap(&[FactorIndex::new(0, 0, 0, 2), FactorIndex::new(0, 2, 0, 0)]), 2);
    }

    #[test]
    fn single_contraction_matches_direct_sum() {
        let k = vec![0.3, 0.6];
        let amp = vec![0.5, 0.4];
        let toy = Toy {
            r: vec![0.0, 0.25],
            k: k.clone(),
            amp: amp.clone(),
        };
        let internal = InternalSpace::new(&k, 2, 2);
        let eng = Engine::new(&toy, &internal);
        // (m,p,n,q) = (1,0,0,1) then (0,1,1,0): output sector (1,1).
        let t = [FactorIndex::new(1, 0, 0, 1), FactorIndex::new(0, 1, 1, 0)];
        let v = eng.evaluate(&t);
        for (ir, &r) in toy.r.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    let (ki, kj) = (k[i], k[j]);
                    let mut direct = Complex64::new(0.0, 0.0);
                    for x in 0..2 {
                        let kx = k[x];
                        // W_2 acts on Omega at r + r_2 with r_2 = 0.
                        let w2 = Complex64::new((1.0 + kx) * (1.0 + kj) / (1.0 + r), 0.1 * (1.0 + kx) * (1.0 + kj));
                        // F_1 at k_x + r + r~_1 with r~_1 = 0; W_1 at r + r_1 with r_1 = 0.
                        let f1 = 1.0 / (2.0 + kx + r);
                        let w1 = Complex64::new((1.0 + ki) * (1.0 + kx) / (1.0 + r), 0.1 * (1.0 + ki) * (1.0 + kx));
                        let fl = 1.0 / (1.0 + r + kj);
                        let f0 = 1.0 / (1.0 + r + ki);
                        direct += w1 * w2 * (f0 * f1 * fl * amp[x] * amp[x]);
                    }
                    let col = i * 2 + j;
                    assert!((v[col * 2 + ir] - direct).norm() < 1e-14, "{:?} {:?}", v[col * 2 + ir], direct);
                }
            }
        }
    }
}

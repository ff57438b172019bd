//! First-quadrant spectral sequence of the Borel fibration on a finite
//! bidegree window.
//!
//! The second page is the tensor product of an even-degree base ring and
//! a fiber ring, with one basis class per pair of basis monomials. Every
//! later page is tracked as a subquotient of the second-page coordinate
//! space at each bidegree: a subspace of surviving cycles and a subspace
//! of accumulated boundaries, with canonical representatives chosen by
//! row reduction. Differentials are given on generating classes only and
//! extended by the Leibniz rule; page turning computes exact kernels and
//! images over Z_p.
//!
//! Before a nonzero differential is applied, the engine checks that the
//! Leibniz extension is compatible with the ring relations on every basis
//! pair in the window and that it squares to zero. An assignment that
//! contradicts a truncation relation (the divisibility obstruction) is
//! therefore rejected here rather than producing a wrong page.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::Serialize;
use serde_json::Value;

use crate::algebra::{deglex, Element, Monomial, RingPresentation};
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::linalg::{FpMatrix, Subspace};

/// Finite bidegree window: base degrees `0..=k_max`, fiber degrees
/// `0..=l_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub k_max: usize,
    pub l_max: usize,
}

impl Window {
    pub fn new(k_max: usize, l_max: usize) -> Self {
        Window { k_max, l_max }
    }

    /// Default sizing rule: every differential whose source sits in total
    /// degree at most `target` stays inside the window.
    pub fn for_run(p: u32, target: usize, fiber_top: usize) -> Self {
        Window {
            k_max: 2 * (target + 2 * p as usize),
            l_max: target.max(fiber_top),
        }
    }

    pub fn span(&self) -> usize {
        self.k_max + self.l_max
    }
}

/// Basis class of the second page: a base monomial tensor a fiber
/// monomial.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TensorMonomial {
    pub base: Monomial,
    pub fiber: Monomial,
}

/// The tensor-product algebra underlying every page: fixed bases per
/// bidegree and the induced product with the usual sign rule (trivial
/// here because the base is concentrated in even degrees).
#[derive(Debug)]
pub struct E2Algebra {
    base: RingPresentation,
    fiber: RingPresentation,
    window: Window,
    basis: BTreeMap<(usize, usize), Vec<TensorMonomial>>,
    index: HashMap<TensorMonomial, usize>,
}

/// A value at one bidegree in second-page coordinates. Bidegrees may be
/// negative while applying the Leibniz rule; those carry no coordinates
/// and stand for a structural zero.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Val {
    k: i64,
    l: i64,
    v: Vec<u32>,
}

impl Val {
    fn is_zero(&self) -> bool {
        self.v.iter().all(|&c| c == 0)
    }
}

impl E2Algebra {
    fn new(base: RingPresentation, fiber: RingPresentation, window: Window) -> Result<Arc<Self>> {
        if base.prime() != fiber.prime() {
            return Err(Error::InvalidParams(
                "base and fiber must share the coefficient field".into(),
            ));
        }
        if let Some(g) = base.generators().iter().find(|g| g.is_odd()) {
            return Err(Error::BaseNotEven {
                name: g.name.clone(),
                degree: g.degree,
            });
        }
        if base.truncation() < window.k_max {
            return Err(Error::WindowTooSmall(format!(
                "base window {} does not cover k_max {}",
                base.truncation(),
                window.k_max
            )));
        }
        if fiber.truncation() < window.l_max {
            return Err(Error::WindowTooSmall(format!(
                "fiber window {} does not cover l_max {}",
                fiber.truncation(),
                window.l_max
            )));
        }
        let mut basis = BTreeMap::new();
        let mut index = HashMap::new();
        for k in 0..=window.k_max {
            let base_basis = base.monomial_basis(k)?;
            for l in 0..=window.l_max {
                let fiber_basis = fiber.monomial_basis(l)?;
                let mut cell = Vec::with_capacity(base_basis.len() * fiber_basis.len());
                for bm in &base_basis {
                    for fm in &fiber_basis {
                        let tm = TensorMonomial {
                            base: bm.clone(),
                            fiber: fm.clone(),
                        };
                        index.insert(tm.clone(), cell.len());
                        cell.push(tm);
                    }
                }
                basis.insert((k, l), cell);
            }
        }
        Ok(Arc::new(E2Algebra {
            base,
            fiber,
            window,
            basis,
            index,
        }))
    }

    fn field(&self) -> PrimeField {
        self.base.field()
    }

    pub fn window(&self) -> Window {
        self.window
    }

    fn dim_i(&self, k: i64, l: i64) -> Result<usize> {
        if k < 0 || l < 0 {
            return Ok(0);
        }
        let (k, l) = (k as usize, l as usize);
        if k > self.window.k_max || l > self.window.l_max {
            return Err(Error::WindowTooSmall(format!(
                "bidegree ({k},{l}) lies outside the window"
            )));
        }
        Ok(self.basis[&(k, l)].len())
    }

    fn zero_val(&self, k: i64, l: i64) -> Result<Val> {
        let dim = self.dim_i(k, l)?;
        Ok(Val {
            k,
            l,
            v: vec![0; dim],
        })
    }

    fn basis_at(&self, k: i64, l: i64) -> &[TensorMonomial] {
        if k < 0 || l < 0 {
            return &[];
        }
        self.basis
            .get(&(k as usize, l as usize))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn bidegree_of(&self, m: &TensorMonomial) -> (usize, usize) {
        (
            m.base.degree(self.base.generators()),
            m.fiber.degree(self.fiber.generators()),
        )
    }

    fn add_vals(&self, a: &Val, b: &Val) -> Val {
        debug_assert_eq!((a.k, a.l), (b.k, b.l));
        let f = self.field();
        Val {
            k: a.k,
            l: a.l,
            v: a
                .v
                .iter()
                .zip(&b.v)
                .map(|(&x, &y)| f.add(x, y))
                .collect(),
        }
    }

    fn scale_val(&self, a: &Val, c: u32) -> Val {
        let f = self.field();
        Val {
            k: a.k,
            l: a.l,
            v: a.v.iter().map(|&x| f.mul(x, c)).collect(),
        }
    }

    /// Product of two coordinate values, with normal-form reduction in
    /// both tensor factors.
    fn mul_vals(&self, a: &Val, b: &Val) -> Result<Val> {
        let k = a.k + b.k;
        let l = a.l + b.l;
        if a.is_zero() || b.is_zero() {
            if k >= 0 && l >= 0 && (k as usize > self.window.k_max || l as usize > self.window.l_max)
            {
                return Err(Error::WindowTooSmall(format!(
                    "product lands at ({k},{l}) outside the window"
                )));
            }
            return self.zero_val(k.min(0).max(k.min(0)).max(k).min(k), l).or_else(|_| {
                Ok(Val {
                    k,
                    l,
                    v: Vec::new(),
                })
            });
        }
        let dim = self.dim_i(k, l)?;
        let f = self.field();
        let mut out = vec![0u32; dim];
        let ab = self.basis_at(a.k, a.l);
        let bb = self.basis_at(b.k, b.l);
        for (i, &ca) in a.v.iter().enumerate() {
            if ca == 0 {
                continue;
            }
            for (j, &cb) in b.v.iter().enumerate() {
                if cb == 0 {
                    continue;
                }
                let m1 = &ab[i];
                let m2 = &bb[j];
                let Some((bsign, bprod)) = self.base.mono_mul(&m1.base, &m2.base) else {
                    continue;
                };
                debug_assert_eq!(bsign, 1, "base is concentrated in even degrees");
                let belem = self.base.reduce_monomial(&bprod);
                let Some((fsign, fprod)) = self.fiber.mono_mul(&m1.fiber, &m2.fiber) else {
                    continue;
                };
                let felem = self.fiber.reduce_monomial(&fprod);
                let mut c0 = f.mul(ca, cb);
                if fsign < 0 {
                    c0 = f.neg(c0);
                }
                for (bm, bc) in belem.terms() {
                    for (fm, fc) in felem.terms() {
                        let tm = TensorMonomial {
                            base: bm.clone(),
                            fiber: fm.clone(),
                        };
                        let idx = *self
                            .index
                            .get(&tm)
                            .expect("reduced product stays in the window basis");
                        out[idx] = f.add(out[idx], f.mul(c0, f.mul(bc, fc)));
                    }
                }
            }
        }
        Ok(Val { k, l, v: out })
    }

    fn dense(&self, k: usize, l: usize, sparse: &[(TensorMonomial, u32)]) -> Result<Val> {
        let dim = self.dim_i(k as i64, l as i64)?;
        let f = self.field();
        let mut v = vec![0u32; dim];
        for (m, c) in sparse {
            let (mk, ml) = self.bidegree_of(m);
            if (mk, ml) != (k, l) {
                return Err(Error::InvalidParams(format!(
                    "term at bidegree ({mk},{ml}) does not live at ({k},{l})"
                )));
            }
            let idx = *self
                .index
                .get(m)
                .ok_or_else(|| Error::InvalidParams("monomial is not in the window basis".into()))?;
            v[idx] = f.add(v[idx], *c);
        }
        Ok(Val {
            k: k as i64,
            l: l as i64,
            v,
        })
    }

    fn sparse(&self, val: &Val) -> Vec<(TensorMonomial, u32)> {
        let basis = self.basis_at(val.k, val.l);
        val.v
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| (basis[i].clone(), c))
            .collect()
    }

    fn format_tensor(&self, m: &TensorMonomial) -> String {
        format!(
            "{}⊗{}",
            self.base.format_monomial(&m.base),
            self.fiber.format_monomial(&m.fiber)
        )
    }

    fn format_val(&self, val: &Val) -> String {
        let terms = self.sparse(val);
        if terms.is_empty() {
            return "0".to_string();
        }
        terms
            .iter()
            .map(|(m, c)| {
                if *c == 1 {
                    self.format_tensor(m)
                } else {
                    format!("{}*{}", c, self.format_tensor(m))
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// One bidegree of a page: cycles surviving so far and boundaries
/// accumulated so far, both as subspaces of the second-page coordinates,
/// plus canonical representatives of the quotient classes.
#[derive(Debug, Clone)]
struct Cell {
    cycles: Subspace,
    boundaries: Subspace,
    reps: Vec<Vec<u32>>,
    rep_pivots: Vec<usize>,
}

impl Cell {
    fn new(field: PrimeField, cycles: Subspace, boundaries: Subspace) -> Cell {
        debug_assert!(boundaries.is_subspace_of(&cycles));
        let mut quotient = Subspace::empty(field, cycles.ambient());
        for row in cycles.basis() {
            let mut w = row.clone();
            boundaries.reduce(&mut w);
            quotient.insert(&w);
        }
        let reps = quotient.basis().to_vec();
        let rep_pivots = quotient.pivots().to_vec();
        Cell {
            cycles,
            boundaries,
            reps,
            rep_pivots,
        }
    }

    fn full(field: PrimeField, ambient: usize) -> Cell {
        Cell::new(
            field,
            Subspace::full(field, ambient),
            Subspace::empty(field, ambient),
        )
    }

    fn dim(&self) -> usize {
        self.reps.len()
    }

    /// Coordinates of a coordinate vector in the class basis, reducing
    /// modulo boundaries first; `None` when the vector does not lie in
    /// cycles + boundaries.
    fn express(&self, field: PrimeField, v: &[u32]) -> Option<Vec<u32>> {
        let mut w = v.to_vec();
        self.boundaries.reduce(&mut w);
        let mut coords = vec![0u32; self.reps.len()];
        for (i, (rep, &pivot)) in self.reps.iter().zip(&self.rep_pivots).enumerate() {
            let c = w[pivot];
            if c != 0 {
                coords[i] = c;
                for j in 0..w.len() {
                    let t = field.mul(c, rep[j]);
                    w[j] = field.sub(w[j], t);
                }
            }
        }
        if w.iter().all(|&c| c == 0) {
            Some(coords)
        } else {
            None
        }
    }
}

/// Reference to one class on a page.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassRef {
    pub k: usize,
    pub l: usize,
    pub index: usize,
}

/// A page of the spectral sequence on the window.
#[derive(Debug, Clone)]
pub struct BigradedPage {
    r: u32,
    algebra: Arc<E2Algebra>,
    cells: BTreeMap<(usize, usize), Cell>,
}

/// Build the second page from an even base and a fiber: the basis at
/// (k, l) is the product of the degree-k base basis and the degree-l
/// fiber basis.
pub fn build_e2(
    base: &RingPresentation,
    fiber: &RingPresentation,
    window: Window,
) -> Result<BigradedPage> {
    let algebra = E2Algebra::new(base.clone(), fiber.clone(), window)?;
    let field = algebra.field();
    let mut cells = BTreeMap::new();
    for (&(k, l), basis) in &algebra.basis {
        cells.insert((k, l), Cell::full(field, basis.len()));
    }
    Ok(BigradedPage {
        r: 2,
        algebra,
        cells,
    })
}

impl BigradedPage {
    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn window(&self) -> Window {
        self.algebra.window
    }

    pub fn field(&self) -> PrimeField {
        self.algebra.field()
    }

    pub fn base(&self) -> &RingPresentation {
        &self.algebra.base
    }

    pub fn fiber(&self) -> &RingPresentation {
        &self.algebra.fiber
    }

    pub fn dim(&self, k: usize, l: usize) -> usize {
        self.cells.get(&(k, l)).map_or(0, Cell::dim)
    }

    pub fn e2_dim(&self, k: usize, l: usize) -> usize {
        self.algebra
            .basis
            .get(&(k, l))
            .map_or(0, Vec::len)
    }

    pub fn e2_basis(&self, k: usize, l: usize) -> &[TensorMonomial] {
        self.algebra.basis_at(k as i64, l as i64)
    }

    /// Nonzero entries as (k, l, dim), k then l ascending.
    pub fn dims_snapshot(&self) -> Vec<(usize, usize, usize)> {
        self.cells
            .iter()
            .filter(|(_, c)| c.dim() > 0)
            .map(|(&(k, l), c)| (k, l, c.dim()))
            .collect()
    }

    /// Tensor monomial from (name, exponent) pairs in each factor.
    pub fn tensor(
        &self,
        base_pairs: &[(&str, u32)],
        fiber_pairs: &[(&str, u32)],
    ) -> Result<TensorMonomial> {
        Ok(TensorMonomial {
            base: self.algebra.base.monomial(base_pairs)?,
            fiber: self.algebra.fiber.monomial(fiber_pairs)?,
        })
    }

    pub fn format_tensor(&self, m: &TensorMonomial) -> String {
        self.algebra.format_tensor(m)
    }

    /// Canonical representative of a class, as a sparse combination of
    /// second-page monomials.
    pub fn class_representative(&self, class: ClassRef) -> Vec<(TensorMonomial, u32)> {
        let cell = &self.cells[&(class.k, class.l)];
        let val = Val {
            k: class.k as i64,
            l: class.l as i64,
            v: cell.reps[class.index].clone(),
        };
        self.algebra.sparse(&val)
    }

    pub fn class_label(&self, class: ClassRef) -> String {
        let cell = &self.cells[&(class.k, class.l)];
        let val = Val {
            k: class.k as i64,
            l: class.l as i64,
            v: cell.reps[class.index].clone(),
        };
        format!("[{}]", self.algebra.format_val(&val))
    }

    /// Express a sparse second-page value as class coordinates at its
    /// bidegree; `None` when it is not a surviving class.
    pub fn express(
        &self,
        k: usize,
        l: usize,
        value: &[(TensorMonomial, u32)],
    ) -> Result<Option<Vec<u32>>> {
        let val = self.algebra.dense(k, l, value)?;
        Ok(self
            .cells
            .get(&(k, l))
            .and_then(|c| c.express(self.field(), &val.v)))
    }

    /// Product of two classes in class coordinates at the sum bidegree;
    /// `Ok(None)` when the representative product is not a surviving
    /// class there.
    pub fn product(&self, a: ClassRef, b: ClassRef) -> Result<Option<(usize, usize, Vec<u32>)>> {
        let ca = &self.cells[&(a.k, a.l)];
        let cb = &self.cells[&(b.k, b.l)];
        let va = Val {
            k: a.k as i64,
            l: a.l as i64,
            v: ca.reps[a.index].clone(),
        };
        let vb = Val {
            k: b.k as i64,
            l: b.l as i64,
            v: cb.reps[b.index].clone(),
        };
        let prod = self.algebra.mul_vals(&va, &vb)?;
        let (k, l) = (prod.k as usize, prod.l as usize);
        let Some(cell) = self.cells.get(&(k, l)) else {
            return Err(Error::WindowTooSmall(format!(
                "product bidegree ({k},{l}) is outside the window"
            )));
        };
        Ok(cell.express(self.field(), &prod.v).map(|c| (k, l, c)))
    }

    /// True when, for every remaining page index, every differential
    /// whose source lies in total degree at most `target` has a zero
    /// source or target. The restriction of the page to those total
    /// degrees is then final.
    pub fn is_collapsed_for(&self, target: usize) -> bool {
        let window = self.algebra.window;
        let nonzero: Vec<(usize, usize)> = self
            .cells
            .iter()
            .filter(|(_, c)| c.dim() > 0)
            .map(|(&b, _)| b)
            .collect();
        for r in self.r as usize..=window.span() {
            for &(k, l) in &nonzero {
                if k + l > target {
                    continue;
                }
                if l + 1 < r {
                    continue; // target fiber degree negative
                }
                let (tk, tl) = (k + r, l + 1 - r);
                if tk <= window.k_max && self.dim(tk, tl) > 0 {
                    return false;
                }
            }
        }
        true
    }
}

/// Differential data for one page: values on generating classes, given
/// as sparse second-page combinations at the target bidegree. Everything
/// else follows from the Leibniz rule.
#[derive(Debug, Clone)]
pub struct DifferentialSpec {
    r: u32,
    assignments: Vec<(TensorMonomial, Vec<(TensorMonomial, u32)>)>,
}

impl DifferentialSpec {
    pub fn zero(r: u32) -> Self {
        DifferentialSpec {
            r,
            assignments: Vec::new(),
        }
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn is_zero(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Add the value of the differential on one generating class. The
    /// source must be a pure fiber class (base part 1); base classes are
    /// permanent for positional reasons.
    pub fn assign(
        mut self,
        source: TensorMonomial,
        value: Vec<(TensorMonomial, u32)>,
    ) -> Result<Self> {
        if !source.base.is_one() {
            return Err(Error::InvalidParams(
                "differential sources are fiber classes; base classes are permanent".into(),
            ));
        }
        if self
            .assignments
            .iter()
            .any(|(s, _)| s.fiber == source.fiber)
        {
            return Err(Error::InvalidParams(
                "duplicate differential assignment".into(),
            ));
        }
        self.assignments.push((source, value));
        Ok(self)
    }
}

/// Per-page Leibniz evaluator with memoization over tensor monomials.
struct LeibnizEval<'a> {
    page: &'a BigradedPage,
    r: u32,
    // assignment keys sorted by fiber degree descending, then degree-lex
    keys: Vec<(Monomial, Val)>,
    memo: HashMap<TensorMonomial, Val>,
}

impl<'a> LeibnizEval<'a> {
    fn new(page: &'a BigradedPage, spec: &DifferentialSpec) -> Result<Self> {
        if spec.r != page.r {
            return Err(Error::InvalidParams(format!(
                "differential spec is for page {} but the page is E_{}",
                spec.r, page.r
            )));
        }
        let alg = &page.algebra;
        let r = spec.r;
        let mut keys = Vec::new();
        for (source, value) in &spec.assignments {
            let (sk, sl) = alg.bidegree_of(source);
            debug_assert_eq!(sk, 0);
            let tk = sk as i64 + r as i64;
            let tl = sl as i64 - r as i64 + 1;
            let dense = if value.is_empty() {
                alg.zero_val(tk, tl)?
            } else {
                if tl < 0 {
                    return Err(Error::InvalidParams(
                        "assignment value lives below the first quadrant".into(),
                    ));
                }
                alg.dense(tk as usize, tl as usize, value)?
            };
            // the source must actually survive to this page
            let source_val = alg.dense(sk, sl, &[(source.clone(), 1)])?;
            let alive = page
                .cells
                .get(&(sk, sl))
                .and_then(|c| c.express(alg.field(), &source_val.v))
                .map(|coords| coords.iter().any(|&c| c != 0))
                .unwrap_or(false);
            if !alive {
                return Err(Error::NotASurvivingClass {
                    k: sk,
                    l: sl,
                    r: page.r,
                });
            }
            keys.push((source.fiber.clone(), dense));
        }
        let fiber_gens = page.algebra.fiber.generators();
        keys.sort_by(|a, b| {
            let da = a.0.degree(fiber_gens);
            let db = b.0.degree(fiber_gens);
            db.cmp(&da).then_with(|| deglex(fiber_gens, &a.0, &b.0))
        });
        Ok(LeibnizEval {
            page,
            r,
            keys,
            memo: HashMap::new(),
        })
    }

    /// d_r of a single tensor monomial, at bidegree (k + r, l - r + 1).
    fn of_monomial(&mut self, m: &TensorMonomial) -> Result<Val> {
        if let Some(v) = self.memo.get(m) {
            return Ok(v.clone());
        }
        let alg = Arc::clone(&self.page.algebra);
        let (k, l) = alg.bidegree_of(m);
        let result = if !m.base.is_one() {
            // d(u ⊗ w) = (u ⊗ 1) · d(1 ⊗ w); the base factor is even and
            // permanent.
            let fiber_part = TensorMonomial {
                base: Monomial::one(alg.base.generators().len()),
                fiber: m.fiber.clone(),
            };
            let d_fiber = self.of_monomial(&fiber_part)?;
            let base_val = alg.dense(
                k,
                0,
                &[(
                    TensorMonomial {
                        base: m.base.clone(),
                        fiber: Monomial::one(alg.fiber.generators().len()),
                    },
                    1,
                )],
            )?;
            alg.mul_vals(&base_val, &d_fiber)?
        } else {
            self.of_fiber_monomial(&m.fiber, l)?
        };
        self.memo.insert(m.clone(), result.clone());
        Ok(result)
    }

    fn of_fiber_monomial(&mut self, w: &Monomial, l: usize) -> Result<Val> {
        let alg = Arc::clone(&self.page.algebra);
        let f = alg.field();
        let fiber_gens = alg.fiber.generators().to_vec();
        let target = |deg: usize| -> (i64, i64) {
            (self.r as i64, deg as i64 - self.r as i64 + 1)
        };
        if w.is_one() {
            let (tk, tl) = target(0);
            return alg.zero_val(tk, tl);
        }
        // prefer the largest assigned class dividing w, so assignments on
        // composite classes (late transgressions) take precedence over
        // the generator fallback
        let hit = self
            .keys
            .iter()
            .find(|(key, _)| key.divides(w))
            .map(|(key, val)| (key.clone(), val.clone()));
        let (kappa, d_kappa) = match hit {
            Some(x) => x,
            None => {
                // factor out the first generator present; its
                // differential must be forced zero by position
                let gen_idx = w
                    .exponents()
                    .iter()
                    .position(|&e| e > 0)
                    .expect("non-unit monomial has a generator");
                let gen_name = fiber_gens[gen_idx].name.clone();
                let gen_degree = fiber_gens[gen_idx].degree;
                let (tk, tl) = target(gen_degree);
                let forced_zero = tl < 0 || alg.dim_i(tk, tl)? == 0;
                if !forced_zero {
                    return Err(Error::UnassignedGenerator(gen_name));
                }
                let mut exps = vec![0u32; fiber_gens.len()];
                exps[gen_idx] = 1;
                (Monomial::from_exponents(exps), alg.zero_val(tk, tl)?)
            }
        };
        let rest = w.quotient_by(&kappa);
        let (sign, check) = alg
            .fiber
            .mono_mul(&kappa, &rest)
            .expect("factors of an admissible monomial multiply back");
        debug_assert_eq!(&check, w);
        let kappa_degree = kappa.degree(&fiber_gens);
        let rest_degree = rest.degree(&fiber_gens);
        let base_one = Monomial::one(alg.base.generators().len());
        // d(κ) · rest
        let rest_val = alg.dense(
            0,
            rest_degree,
            &[(
                TensorMonomial {
                    base: base_one.clone(),
                    fiber: alg_normal(&alg.fiber, &rest),
                },
                1,
            )],
        )?;
        let term1 = alg.mul_vals(&d_kappa, &rest_val)?;
        // ± κ · d(rest)
        let d_rest = self.of_fiber_monomial(&rest, rest_degree)?;
        let kappa_val = alg.dense(
            0,
            kappa_degree,
            &[(
                TensorMonomial {
                    base: base_one,
                    fiber: kappa.clone(),
                },
                1,
            )],
        )?;
        let mut term2 = alg.mul_vals(&kappa_val, &d_rest)?;
        if kappa_degree % 2 == 1 {
            term2 = alg.scale_val(&term2, f.neg(1));
        }
        let mut out = alg.add_vals(&term1, &term2);
        if sign < 0 {
            out = alg.scale_val(&out, f.neg(1));
        }
        debug_assert_eq!((out.k, out.l), target(l));
        Ok(out)
    }

    /// Linear extension to a coordinate vector at (k, l).
    fn of_vector(&mut self, k: usize, l: usize, v: &[u32]) -> Result<Val> {
        let alg = Arc::clone(&self.page.algebra);
        let tk = k as i64 + self.r as i64;
        let tl = l as i64 - self.r as i64 + 1;
        let mut acc = alg.zero_val(tk, tl)?;
        let basis = alg.basis_at(k as i64, l as i64).to_vec();
        for (i, &c) in v.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let d = self.of_monomial(&basis[i])?;
            acc = alg.add_vals(&acc, &alg.scale_val(&d, c));
        }
        Ok(acc)
    }
}

// rest is already a sub-monomial of an admissible basis monomial, so it
// is its own normal form; this just documents the invariant.
fn alg_normal(_fiber: &RingPresentation, m: &Monomial) -> Monomial {
    m.clone()
}

/// Value of the page differential on one basis class of the page,
/// extended by the Leibniz rule, as a sparse second-page combination at
/// the target bidegree.
pub fn leibniz_extend(
    page: &BigradedPage,
    spec: &DifferentialSpec,
    class: &TensorMonomial,
) -> Result<Vec<(TensorMonomial, u32)>> {
    let mut eval = LeibnizEval::new(page, spec)?;
    let val = eval.of_monomial(class)?;
    Ok(page.algebra.sparse(&val))
}

/// Rank record of one nonzero differential.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct DiffRecord {
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub rank: usize,
}

/// Turn one page: the next page is kernel modulo image at every
/// bidegree. Before anything is modified the differential is checked to
/// square to zero and to satisfy the Leibniz identity on every basis
/// pair whose product and differential stay inside the window.
pub fn turn_page(page: &BigradedPage, spec: &DifferentialSpec) -> Result<BigradedPage> {
    turn_page_with_stats(page, spec).map(|(p, _)| p)
}

pub fn turn_page_with_stats(
    page: &BigradedPage,
    spec: &DifferentialSpec,
) -> Result<(BigradedPage, Vec<DiffRecord>)> {
    let alg = Arc::clone(&page.algebra);
    let field = alg.field();
    let window = alg.window;
    let r = page.r as usize;
    let mut eval = LeibnizEval::new(page, spec)?;

    // class-coordinate matrices of d_r, for every source cell whose
    // target column stays inside the window
    let mut mats: BTreeMap<(usize, usize), FpMatrix> = BTreeMap::new();
    if !spec.is_zero() {
        for (&(k, l), cell) in &page.cells {
            if cell.dim() == 0 || k + r > window.k_max {
                continue;
            }
            let (tk, tl) = (k + r, l as i64 - r as i64 + 1);
            let target_dim = if tl < 0 {
                0
            } else {
                page.dim(tk, tl as usize)
            };
            let mut mat = FpMatrix::zero(field, target_dim, cell.dim());
            for (j, rep) in cell.reps.iter().enumerate() {
                let val = eval.of_vector(k, l, rep)?;
                if val.is_zero() {
                    continue;
                }
                let coords = page.cells[&(tk, tl as usize)]
                    .express(field, &val.v)
                    .ok_or(Error::NotASurvivingClass {
                        k: tk,
                        l: tl as usize,
                        r: page.r,
                    })?;
                for (i, &c) in coords.iter().enumerate() {
                    mat.set(i, j, c);
                }
            }
            mats.insert((k, l), mat);
        }

        // d ∘ d = 0 wherever both arrows stay inside the window
        for (&(k, l), m1) in &mats {
            if l as i64 - r as i64 + 1 < 0 {
                continue;
            }
            let t = (k + r, (l as i64 - r as i64 + 1) as usize);
            if let Some(m2) = mats.get(&t) {
                if !m2.mul(m1).is_zero() {
                    return Err(Error::DifferentialNotSquareZero { k, l });
                }
            }
        }

        leibniz_sweep(page, &mut eval)?;
    }

    // assemble the next page
    let mut records = Vec::new();
    for ((k, l), m) in &mats {
        let rank = m.rank();
        if rank > 0 {
            records.push(DiffRecord {
                from: (*k, *l),
                to: (*k + r, (*l as i64 - r as i64 + 1) as usize),
                rank,
            });
        }
    }

    let mut new_cells = BTreeMap::new();
    for (&(k, l), cell) in &page.cells {
        let new_cycles = match mats.get(&(k, l)) {
            Some(m) => {
                let mut z = cell.boundaries.clone();
                for coeffs in m.kernel_basis() {
                    z.insert(&combine(field, &cell.reps, &coeffs));
                }
                z
            }
            None => cell.cycles.clone(),
        };
        let mut new_boundaries = cell.boundaries.clone();
        if k >= r && l + r >= 1 {
            let source = (k - r, l + r - 1);
            if let Some(m_in) = mats.get(&source) {
                let source_cell = &page.cells[&source];
                for j in 0..m_in.cols() {
                    let coords: Vec<u32> = (0..m_in.rows()).map(|i| m_in.get(i, j)).collect();
                    if coords.iter().any(|&c| c != 0) {
                        new_boundaries.insert(&combine(field, &cell.reps, &coords));
                    }
                    let _ = source_cell;
                }
            }
        }
        new_cells.insert((k, l), Cell::new(field, new_cycles, new_boundaries));
    }

    Ok((
        BigradedPage {
            r: page.r + 1,
            algebra: alg,
            cells: new_cells,
        },
        records,
    ))
}

fn combine(field: PrimeField, reps: &[Vec<u32>], coeffs: &[u32]) -> Vec<u32> {
    let ambient = reps.first().map_or(0, Vec::len);
    let mut out = vec![0u32; ambient];
    for (rep, &c) in reps.iter().zip(coeffs) {
        if c == 0 {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(rep) {
            *o = field.add(*o, field.mul(c, x));
        }
    }
    out
}

/// Check d(xy) = d(x)y + (-1)^|x| x d(y) for every pair of classes whose
/// product and its differential stay inside the window. An assignment
/// that contradicts a truncation relation of the fiber fails here: the
/// product side vanishes by the relation while the Leibniz side does
/// not.
fn leibniz_sweep(page: &BigradedPage, eval: &mut LeibnizEval) -> Result<()> {
    let alg = Arc::clone(&page.algebra);
    let field = alg.field();
    let window = alg.window;
    let r = page.r as usize;
    let nonzero: Vec<(usize, usize)> = page
        .cells
        .iter()
        .filter(|(_, c)| c.dim() > 0)
        .map(|(&b, _)| b)
        .collect();
    for (i, &(k1, l1)) in nonzero.iter().enumerate() {
        for &(k2, l2) in &nonzero[i..] {
            let (pk, pl) = (k1 + k2, l1 + l2);
            if pk > window.k_max || pl > window.l_max || pk + r > window.k_max {
                continue;
            }
            let c1 = &page.cells[&(k1, l1)];
            let c2 = &page.cells[&(k2, l2)];
            for x in &c1.reps {
                let vx = Val {
                    k: k1 as i64,
                    l: l1 as i64,
                    v: x.clone(),
                };
                let dx = eval.of_vector(k1, l1, x)?;
                for y in &c2.reps {
                    let vy = Val {
                        k: k2 as i64,
                        l: l2 as i64,
                        v: y.clone(),
                    };
                    let prod = alg.mul_vals(&vx, &vy)?;
                    let lhs = eval.of_vector(pk, pl, &prod.v)?;
                    let dy = eval.of_vector(k2, l2, y)?;
                    let term1 = alg.mul_vals(&dx, &vy)?;
                    let mut term2 = alg.mul_vals(&vx, &dy)?;
                    if (k1 + l1) % 2 == 1 {
                        term2 = alg.scale_val(&term2, field.neg(1));
                    }
                    let rhs = alg.add_vals(&term1, &term2);
                    if lhs != rhs {
                        return Err(Error::LeibnizInconsistent {
                            k1,
                            l1,
                            k2,
                            l2,
                            detail: format!(
                                "d({} * {}) = {} but the Leibniz expansion gives {}",
                                alg.format_val(&vx),
                                alg.format_val(&vy),
                                alg.format_val(&lhs),
                                alg.format_val(&rhs)
                            ),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Snapshot of one page turn.
#[derive(Debug, Clone, Serialize)]
pub struct PageSnapshot {
    pub r: u32,
    pub dims: Vec<(usize, usize, usize)>,
    pub differentials: Vec<DiffRecord>,
}

/// Full record of a run: every page turned, the limit dimensions, and
/// the total-degree dimension table.
#[derive(Debug, Clone, Serialize)]
pub struct PageTranscript {
    pub pages: Vec<PageSnapshot>,
    pub e_inf_dims: Vec<(usize, usize, usize)>,
    pub total_dims: Vec<usize>,
}

impl PageTranscript {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("transcript serializes")
    }
}

/// Run the spectral sequence from the given second page: apply the spec
/// of each page (zero when absent), stop when every remaining
/// differential relevant to total degrees `<= target` is forced zero by
/// bidegree support or the page index exceeds the window span.
pub fn run(
    e2: &BigradedPage,
    specs: &[DifferentialSpec],
    target: usize,
) -> Result<(BigradedPage, PageTranscript)> {
    let window = e2.window();
    let p = e2.field().p() as usize;
    let has_nonzero = specs.iter().any(|s| !s.is_zero());
    if has_nonzero && window.k_max < 2 * (p + target) {
        return Err(Error::WindowTooSmall(format!(
            "k_max {} < 2(p + target) = {}",
            window.k_max,
            2 * (p + target)
        )));
    }
    let fiber_top = (0..=e2.fiber().truncation())
        .filter(|&d| {
            d <= e2.fiber().truncation()
                && !e2.fiber().monomial_basis(d).map(|b| b.is_empty()).unwrap_or(true)
        })
        .max()
        .unwrap_or(0);
    if window.l_max < fiber_top {
        return Err(Error::WindowTooSmall(format!(
            "l_max {} is below the top nonzero fiber degree {}",
            window.l_max, fiber_top
        )));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.r < 2 {
            return Err(Error::InvalidParams("differentials start on page 2".into()));
        }
        if specs[..i].iter().any(|t| t.r == s.r) {
            return Err(Error::InvalidParams(format!(
                "two differential specs for page {}",
                s.r
            )));
        }
    }

    let mut page = e2.clone();
    let mut pages = Vec::new();
    while (page.r as usize) <= window.span() && !page.is_collapsed_for(target) {
        let zero = DifferentialSpec::zero(page.r);
        let spec = specs.iter().find(|s| s.r == page.r).unwrap_or(&zero);
        let dims = page.dims_snapshot();
        let (next, differentials) = turn_page_with_stats(&page, spec)?;
        pages.push(PageSnapshot {
            r: page.r,
            dims,
            differentials,
        });
        page = next;
    }
    let transcript = PageTranscript {
        pages,
        e_inf_dims: page.dims_snapshot(),
        total_dims: total_dims(&page, target)?,
    };
    Ok((page, transcript))
}

/// Dimension of each total degree 0..=max_total of a page.
pub fn total_dims(page: &BigradedPage, max_total: usize) -> Result<Vec<usize>> {
    let window = page.window();
    if max_total > window.k_max || max_total > window.l_max {
        return Err(Error::WindowTooSmall(format!(
            "total degree {} does not fit the window ({}, {})",
            max_total, window.k_max, window.l_max
        )));
    }
    Ok((0..=max_total)
        .map(|j| (0..=j).map(|k| page.dim(k, j - k)).sum())
        .collect())
}

/// One named pass/fail entry of a comparison or scenario report.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

/// A named permanent class expected on the limit page, identified by its
/// bidegree and second-page representative.
#[derive(Debug, Clone)]
pub struct ClassUse {
    pub name: String,
    pub k: usize,
    pub l: usize,
    pub rep: TensorMonomial,
}

/// Compare a limit page against a candidate presentation: the additive
/// dimension table must match, the named classes must survive, and the
/// listed products of named classes must vanish in the total algebra of
/// the limit page. Failures are report entries, not errors.
pub fn match_presentation(
    page: &BigradedPage,
    candidate: &RingPresentation,
    target: usize,
    classes: &[ClassUse],
    vanishing_products: &[(String, Vec<String>)],
) -> Result<Vec<Check>> {
    let alg = Arc::clone(&page.algebra);
    let mut checks = Vec::new();

    let totals = total_dims(page, target)?;
    if candidate.truncation() < target {
        checks.push(Check::new(
            "additive",
            false,
            format!(
                "candidate window {} is smaller than the target degree {}",
                candidate.truncation(),
                target
            ),
        ));
    } else {
        let candidate_dims: Vec<usize> = candidate.poincare_polynomial()[..=target].to_vec();
        let pass = candidate_dims == totals;
        checks.push(Check::new(
            "additive",
            pass,
            format!("limit dims {totals:?} vs candidate dims {candidate_dims:?}"),
        ));
    }

    let mut class_vals: BTreeMap<String, Val> = BTreeMap::new();
    for class in classes {
        let val = alg.dense(class.k, class.l, &[(class.rep.clone(), 1)])?;
        let coords = page
            .cells
            .get(&(class.k, class.l))
            .and_then(|c| c.express(alg.field(), &val.v));
        let alive = coords
            .as_ref()
            .map(|c| c.iter().any(|&x| x != 0))
            .unwrap_or(false);
        checks.push(Check::new(
            &format!("class {}", class.name),
            alive,
            format!(
                "{} at ({},{}): dim {}, {}",
                alg.format_tensor(&class.rep),
                class.k,
                class.l,
                page.dim(class.k, class.l),
                if alive { "survives" } else { "absent" }
            ),
        ));
        if alive {
            class_vals.insert(class.name.clone(), val);
        }
    }

    for (name, factors) in vanishing_products {
        let mut acc: Option<Val> = None;
        let mut failure: Option<String> = None;
        for fname in factors {
            let Some(fval) = class_vals.get(fname) else {
                failure = Some(format!("class {fname} is unavailable"));
                break;
            };
            acc = Some(match acc {
                None => fval.clone(),
                Some(a) => match alg.mul_vals(&a, fval) {
                    Ok(v) => v,
                    Err(e) => {
                        failure = Some(format!("product left the window: {e}"));
                        break;
                    }
                },
            });
        }
        let (pass, detail) = match (failure, acc) {
            (Some(f), _) => (false, f),
            (None, Some(v)) => {
                if v.k < 0 || v.l < 0 {
                    (true, "product lands outside the first quadrant".into())
                } else {
                    match page
                        .cells
                        .get(&(v.k as usize, v.l as usize))
                        .and_then(|c| c.express(alg.field(), &v.v))
                    {
                        Some(coords) => {
                            let zero = coords.iter().all(|&c| c == 0);
                            (
                                zero,
                                format!(
                                    "product at ({},{}) is {}",
                                    v.k,
                                    v.l,
                                    if zero { "zero" } else { "nonzero" }
                                ),
                            )
                        }
                        None => (false, "product is not a surviving class".into()),
                    }
                }
            }
            (None, None) => (false, "empty product".into()),
        };
        checks.push(Check::new(name, pass, detail));
    }

    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{model_space, ModelKind};

    fn case_i_setup(p: u32, m: usize, window: Window) -> BigradedPage {
        let base = model_space(ModelKind::BgTrunc {
            p,
            k: window.k_max / 2,
        })
        .unwrap();
        let fiber = model_space(ModelKind::Lens { p, m })
            .unwrap()
            .retruncated(window.l_max)
            .unwrap();
        build_e2(&base, &fiber, window).unwrap()
    }

    fn d2_case_i(page: &BigradedPage) -> DifferentialSpec {
        DifferentialSpec::zero(2)
            .assign(page.tensor(&[], &[("a", 1)]).unwrap(), vec![])
            .unwrap()
            .assign(
                page.tensor(&[], &[("b", 1)]).unwrap(),
                vec![(page.tensor(&[("t", 1)], &[("a", 1)]).unwrap(), 1)],
            )
            .unwrap()
    }

    fn d2_case_ii(page: &BigradedPage) -> DifferentialSpec {
        DifferentialSpec::zero(2)
            .assign(
                page.tensor(&[], &[("a", 1)]).unwrap(),
                vec![(page.tensor(&[("t", 1)], &[]).unwrap(), 1)],
            )
            .unwrap()
            .assign(page.tensor(&[], &[("b", 1)]).unwrap(), vec![])
            .unwrap()
    }

    #[test]
    fn e2_dims_are_products_of_factor_dims() {
        let window = Window::new(12, 6);
        let page = case_i_setup(3, 3, window);
        // oracle: dim = base_dim(k) * fiber_dim(l) with base 1 in even
        // degrees and lens dims 1 through 2m-1
        for k in 0..=window.k_max {
            for l in 0..=window.l_max {
                let base_dim = usize::from(k % 2 == 0);
                let fiber_dim = usize::from(l < 6);
                assert_eq!(page.dim(k, l), base_dim * fiber_dim, "({k},{l})");
            }
        }
        assert_eq!(page.dim(2, 3), 1);
        let basis = page.e2_basis(2, 3);
        assert_eq!(page.format_tensor(&basis[0]), "t⊗a*b");
        assert_eq!(page.dim(0, 0), 1);
        for l in 0..=window.l_max {
            assert_eq!(page.dim(3, l), 0);
        }
    }

    #[test]
    fn leibniz_on_powers_of_the_even_generator() {
        let window = Window::new(12, 8);
        let page = case_i_setup(3, 4, window); // b^4 = 0, window holds b^3
        let spec = d2_case_i(&page);
        // d(1⊗b^2) = 2 t⊗ab
        let v = leibniz_extend(&page, &spec, &page.tensor(&[], &[("b", 2)]).unwrap()).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(page.format_tensor(&v[0].0), "t⊗a*b");
        assert_eq!(v[0].1, 2);
        // d(1⊗b^3) = 3 t⊗ab^2 = 0 mod 3
        let v = leibniz_extend(&page, &spec, &page.tensor(&[], &[("b", 3)]).unwrap()).unwrap();
        assert!(v.is_empty());
        // d(1) = 0
        let v = leibniz_extend(&page, &spec, &page.tensor(&[], &[]).unwrap()).unwrap();
        assert!(v.is_empty());
        // d(1⊗ab) = 0: the odd generator kills the second term
        let v = leibniz_extend(
            &page,
            &spec,
            &page.tensor(&[], &[("a", 1), ("b", 1)]).unwrap(),
        )
        .unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn page_three_of_the_transgressive_run() {
        let window = Window::new(16, 6);
        let page = case_i_setup(3, 3, window);
        let spec = d2_case_i(&page);
        let e3 = turn_page(&page, &spec).unwrap();
        assert_eq!(e3.r(), 3);
        // 1⊗b is not a cocycle
        assert_eq!(e3.dim(0, 2), 0);
        // class of 1⊗ab^2 survives
        assert_eq!(e3.dim(0, 5), 1);
        // dims never increase
        for k in 0..=window.k_max {
            for l in 0..=window.l_max {
                assert!(e3.dim(k, l) <= page.dim(k, l));
            }
        }
    }

    #[test]
    fn page_three_of_the_degenerating_run() {
        let window = Window::new(16, 6);
        let page = case_i_setup(5, 3, window);
        let spec = d2_case_ii(&page);
        let e3 = turn_page(&page, &spec).unwrap();
        for k in 1..=window.k_max {
            for l in 0..=window.l_max {
                assert_eq!(e3.dim(k, l), 0, "({k},{l})");
            }
        }
        for l in [0usize, 2, 4] {
            assert_eq!(e3.dim(0, l), 1);
        }
        assert_eq!(e3.dim(0, 1), 0);
    }

    #[test]
    fn transgressive_run_reaches_the_stated_dims() {
        // p = 3, n = 1: total dims 1,1,1,1,1,0,0 over degrees 0..=6
        let p = 3u32;
        let target = 6usize;
        let window = Window::for_run(p, target, 6);
        let page = case_i_setup(p, 3, window);
        let d2 = d2_case_i(&page);
        let d6 = DifferentialSpec::zero(6)
            .assign(
                page.tensor(&[], &[("a", 1), ("b", 2)]).unwrap(),
                vec![(page.tensor(&[("t", 3)], &[]).unwrap(), 1)],
            )
            .unwrap();
        let (e_inf, transcript) = run(&page, &[d2, d6], target).unwrap();
        assert_eq!(transcript.total_dims, vec![1, 1, 1, 1, 1, 0, 0]);
        assert_eq!(e_inf.dim(2, 0), 1);
        assert_eq!(e_inf.dim(6, 0), 0); // killed by the transgression
        // collapse happened after page 2p = 6
        assert_eq!(transcript.pages.last().unwrap().r, 6);
    }

    #[test]
    fn degenerating_run_is_column_zero() {
        let p = 5u32;
        let m = 3usize;
        let target = 2 * m;
        let window = Window::for_run(p, target, 2 * m);
        let page = case_i_setup(p, m, window);
        let spec = d2_case_ii(&page);
        let (e_inf, transcript) = run(&page, &[spec], target).unwrap();
        assert_eq!(transcript.total_dims, vec![1, 0, 1, 0, 1, 0, 0]);
        for ((k, _l, d)) in e_inf.dims_snapshot() {
            assert!(k == 0 || d == 0);
        }
        // collapse right after the first turn
        assert_eq!(transcript.pages.len(), 1);
    }

    #[test]
    fn zero_differentials_leave_the_second_page() {
        let window = Window::new(8, 6);
        let page = case_i_setup(3, 3, window);
        let (e_inf, transcript) = run(&page, &[], 4).unwrap();
        for k in 0..=window.k_max {
            for l in 0..=window.l_max {
                assert_eq!(e_inf.dim(k, l), page.dim(k, l));
            }
        }
        // pages may turn with zero differentials, but dims never move
        for snap in &transcript.pages {
            assert!(snap.differentials.is_empty());
        }
    }

    #[test]
    fn degenerate_base_recovers_the_fiber() {
        // trivial base ring: the limit is the fiber itself
        let field = crate::field::PrimeField::new(3).unwrap();
        let base = crate::algebra::RingPresentation::build(
            field,
            vec![],
            vec![],
            8,
            Default::default(),
        )
        .unwrap();
        let fiber = model_space(ModelKind::Lens { p: 3, m: 3 })
            .unwrap()
            .retruncated(6)
            .unwrap();
        let page = build_e2(&base, &fiber, Window::new(8, 6)).unwrap();
        let (e_inf, transcript) = run(&page, &[], 6).unwrap();
        assert_eq!(transcript.total_dims, vec![1, 1, 1, 1, 1, 1, 0]);
        assert_eq!(e_inf.dim(0, 3), 1);
    }

    #[test]
    fn rank_nullity_bookkeeping_per_turn() {
        let window = Window::new(16, 6);
        let page = case_i_setup(3, 3, window);
        let spec = d2_case_i(&page);
        let (e3, records) = turn_page_with_stats(&page, &spec).unwrap();
        let rank_out = |k: usize, l: usize| -> usize {
            records
                .iter()
                .find(|d| d.from == (k, l))
                .map_or(0, |d| d.rank)
        };
        let rank_in = |k: usize, l: usize| -> usize {
            records
                .iter()
                .find(|d| d.to == (k, l))
                .map_or(0, |d| d.rank)
        };
        for k in 0..=window.k_max {
            for l in 0..=window.l_max {
                if k + 2 > window.k_max {
                    continue; // outside the safe region for this turn
                }
                assert_eq!(
                    e3.dim(k, l),
                    page.dim(k, l) - rank_out(k, l) - rank_in(k, l),
                    "({k},{l})"
                );
            }
        }
    }

    #[test]
    fn divisibility_obstruction_is_detected() {
        // m = 4, p = 3: the assignment contradicts b^4 = 0
        let window = Window::new(20, 8);
        let page = case_i_setup(3, 4, window);
        let spec = d2_case_i(&page);
        let err = turn_page(&page, &spec).unwrap_err();
        assert!(
            matches!(err, Error::LeibnizInconsistent { .. }),
            "got {err:?}"
        );
    }

    #[test]
    fn no_divisibility_obstruction_when_p_divides_m() {
        let window = Window::new(24, 12);
        let page = case_i_setup(3, 6, window);
        let spec = d2_case_i(&page);
        assert!(turn_page(&page, &spec).is_ok());
    }

    #[test]
    fn unassigned_generator_with_live_target_errors() {
        let window = Window::new(16, 6);
        let page = case_i_setup(3, 3, window);
        // only a is assigned; b has a nonzero target at (2,1) and no value
        let spec = DifferentialSpec::zero(2)
            .assign(page.tensor(&[], &[("a", 1)]).unwrap(), vec![])
            .unwrap();
        let err = turn_page(&page, &spec).unwrap_err();
        assert_eq!(err, Error::UnassignedGenerator("b".into()));
    }

    #[test]
    fn match_presentation_positive_and_negative() {
        let p = 5u32;
        let m = 3usize;
        let target = 2 * m;
        let window = Window::for_run(p, target, 2 * m);
        let page = case_i_setup(p, m, window);
        let spec = d2_case_ii(&page);
        let (e_inf, _) = run(&page, &[spec], target).unwrap();
        let z = ClassUse {
            name: "z".into(),
            k: 0,
            l: 2,
            rep: e_inf.tensor(&[], &[("b", 1)]).unwrap(),
        };
        let good = model_space(ModelKind::Cp { p, m }).unwrap().retruncated(target).unwrap();
        let checks = match_presentation(
            &e_inf,
            &good,
            target,
            &[z.clone()],
            &[("z^m".into(), vec!["z".into(); m])],
        )
        .unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");

        let bad = model_space(ModelKind::Cp { p, m: 4 }).unwrap().retruncated(target).unwrap();
        let checks = match_presentation(&e_inf, &bad, target, &[z], &[]).unwrap();
        let additive = checks.iter().find(|c| c.name == "additive").unwrap();
        assert!(!additive.pass);
        assert!(additive.detail.contains("[1, 0, 1, 0, 1, 0, 0]"));
    }

    #[test]
    fn transcript_serializes_deterministically() {
        let window = Window::new(16, 6);
        let page = case_i_setup(3, 3, window);
        let spec = d2_case_i(&page);
        let run_once = || {
            let (_, t) = run(&page, &[spec.clone()], 4).unwrap();
            serde_json::to_string(&t.to_json()).unwrap()
        };
        assert_eq!(run_once(), run_once());
    }
}

//! Finitely presented graded-commutative algebras over Z_p.
//!
//! A presentation is a list of named generators with degrees plus a set of
//! homogeneous rewrite rules `lead -> rhs` where every rhs monomial is
//! strictly smaller than the lead in degree-lex order. Rewriting therefore
//! terminates, and construction checks confluence exhaustively on the
//! degree window, so every element has a canonical normal form and
//! equality is decidable.
//!
//! For odd p, squares of odd-degree generators vanish implicitly (the
//! admissibility rule); for p = 2 there is no parity constraint and
//! truncation must be an explicit relation, matching the difference
//! between an exterior factor and a truncated polynomial algebra in
//! characteristic two.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::linalg::FpMatrix;

/// A named generator with its degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneratorSym {
    pub name: String,
    pub degree: usize,
}

impl GeneratorSym {
    pub fn new(name: &str, degree: usize) -> Self {
        GeneratorSym {
            name: name.to_string(),
            degree,
        }
    }

    pub fn is_odd(&self) -> bool {
        self.degree % 2 == 1
    }
}

/// Exponent vector over a fixed generator list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    exponents: Vec<u32>,
}

impl Monomial {
    pub fn one(num_generators: usize) -> Self {
        Monomial {
            exponents: vec![0; num_generators],
        }
    }

    pub fn from_exponents(exponents: Vec<u32>) -> Self {
        Monomial { exponents }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn exponent(&self, i: usize) -> u32 {
        self.exponents[i]
    }

    pub fn is_one(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    pub fn degree(&self, generators: &[GeneratorSym]) -> usize {
        self.exponents
            .iter()
            .zip(generators)
            .map(|(&e, g)| e as usize * g.degree)
            .sum()
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.exponents
            .iter()
            .zip(&other.exponents)
            .all(|(&a, &b)| a <= b)
    }

    pub fn quotient_by(&self, divisor: &Monomial) -> Monomial {
        Monomial {
            exponents: self
                .exponents
                .iter()
                .zip(&divisor.exponents)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    /// Build a monomial over `generators` from (name, exponent) pairs.
    pub fn from_pairs(generators: &[GeneratorSym], pairs: &[(&str, u32)]) -> Result<Monomial> {
        let mut exps = vec![0u32; generators.len()];
        for (name, e) in pairs {
            let idx = generators
                .iter()
                .position(|g| g.name == *name)
                .ok_or_else(|| Error::InvalidParams(format!("unknown generator `{name}`")))?;
            exps[idx] += e;
        }
        Ok(Monomial { exponents: exps })
    }
}

/// Homogeneous rewrite rule: `lead` rewrites to the combination `rhs`
/// (empty rhs means the lead vanishes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub lead: Monomial,
    pub rhs: Vec<(Monomial, u32)>,
}

impl Relation {
    pub fn vanishing(lead: Monomial) -> Self {
        Relation {
            lead,
            rhs: Vec::new(),
        }
    }
}

/// A linear combination of normal-form monomials; zero coefficients are
/// never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Element {
    terms: BTreeMap<Monomial, u32>,
}

impl Element {
    pub fn zero() -> Self {
        Element::default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, u32)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, m: &Monomial) -> u32 {
        self.terms.get(m).copied().unwrap_or(0)
    }

    pub fn add_term(&mut self, field: PrimeField, m: Monomial, c: u32) {
        let c = c % field.p();
        if c == 0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = field.add(*e.get(), c);
                if v == 0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn add(&self, field: PrimeField, other: &Element) -> Element {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(field, m.clone(), c);
        }
        out
    }

    pub fn scale(&self, field: PrimeField, c: u32) -> Element {
        let mut out = Element::zero();
        for (m, a) in self.terms() {
            out.add_term(field, m.clone(), field.mul(a, c));
        }
        out
    }

    /// Degree of a homogeneous nonzero element; `None` for zero or mixed.
    pub fn degree(&self, generators: &[GeneratorSym]) -> Option<usize> {
        let mut degs = self.terms.keys().map(|m| m.degree(generators));
        let first = degs.next()?;
        if degs.all(|d| d == first) {
            Some(first)
        } else {
            None
        }
    }
}

/// A graded-commutative algebra over Z_p presented by generators,
/// homogeneous rewrite relations, and a hard truncation degree. All
/// operations fail loudly outside the window `0..=truncation`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingPresentation {
    field: PrimeField,
    generators: Vec<GeneratorSym>,
    relations: Vec<Relation>,
    truncation: usize,
    metadata: BTreeMap<String, String>,
}

impl RingPresentation {
    /// Validate and construct a presentation. Checks generator-name
    /// uniqueness, homogeneity, termination of rewriting (every rhs
    /// monomial strictly below its lead in degree-lex order), and
    /// confluence on all admissible monomials inside the window.
    pub fn build(
        field: PrimeField,
        generators: Vec<GeneratorSym>,
        relations: Vec<Relation>,
        truncation: usize,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        for (i, g) in generators.iter().enumerate() {
            if g.degree == 0 {
                return Err(Error::InvalidParams(format!(
                    "generator `{}` has degree 0; graded bases would be infinite",
                    g.name
                )));
            }
            if generators[..i].iter().any(|h| h.name == g.name) {
                return Err(Error::DuplicateGenerator(g.name.clone()));
            }
        }

        let mut normalized = Vec::with_capacity(relations.len());
        for rel in relations {
            let lead_degree = rel.lead.degree(&generators);
            let mut rhs = Vec::new();
            for (m, c) in rel.rhs {
                let c = c % field.p();
                if c == 0 {
                    continue;
                }
                let d = m.degree(&generators);
                if d != lead_degree {
                    return Err(Error::NonHomogeneousRelation {
                        lead: format_monomial_raw(&generators, &rel.lead),
                        lead_degree,
                        term_degree: d,
                    });
                }
                if deglex(&generators, &m, &rel.lead) != std::cmp::Ordering::Less {
                    return Err(Error::NonterminatingRewrite {
                        lead: format_monomial_raw(&generators, &rel.lead),
                        term: format_monomial_raw(&generators, &m),
                    });
                }
                rhs.push((m, c));
            }
            rhs.sort_by(|a, b| deglex(&generators, &a.0, &b.0));
            normalized.push(Relation {
                lead: rel.lead,
                rhs,
            });
        }

        let pres = RingPresentation {
            field,
            generators,
            relations: normalized,
            truncation,
            metadata,
        };
        pres.check_confluence()?;
        Ok(pres)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn prime(&self) -> u32 {
        self.field.p()
    }

    pub fn generators(&self) -> &[GeneratorSym] {
        &self.generators
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.name == name)
    }

    /// Rebuild the same presentation with a different window.
    pub fn retruncated(&self, truncation: usize) -> Result<RingPresentation> {
        RingPresentation::build(
            self.field,
            self.generators.clone(),
            self.relations.clone(),
            truncation,
            self.metadata.clone(),
        )
    }

    pub fn monomial(&self, pairs: &[(&str, u32)]) -> Result<Monomial> {
        Monomial::from_pairs(&self.generators, pairs)
    }

    /// Element with a single term, already reduced to normal form.
    pub fn element(&self, coeff: u32, pairs: &[(&str, u32)]) -> Result<Element> {
        let m = self.monomial(pairs)?;
        Ok(self.reduce_monomial(&m).scale(self.field, coeff))
    }

    pub fn generator_element(&self, name: &str) -> Result<Element> {
        self.element(1, &[(name, 1)])
    }

    pub fn unit(&self) -> Element {
        let mut e = Element::zero();
        e.add_term(self.field, Monomial::one(self.generators.len()), 1);
        e
    }

    /// For odd p, odd-degree generators square to zero; exponents above 1
    /// are inadmissible. For p = 2 every exponent vector is admissible.
    pub fn is_admissible(&self, m: &Monomial) -> bool {
        if self.field.p() == 2 {
            return true;
        }
        m.exponents()
            .iter()
            .zip(&self.generators)
            .all(|(&e, g)| !g.is_odd() || e <= 1)
    }

    /// Product of two monomials as (sign, exponent sum); `None` when an
    /// odd-degree generator squares (odd p only). The sign counts the
    /// transpositions of odd-degree generators needed to merge the two
    /// sorted words.
    pub fn mono_mul(&self, a: &Monomial, b: &Monomial) -> Option<(i8, Monomial)> {
        let p = self.field.p();
        let mut swaps: u64 = 0;
        if p != 2 {
            for (i, g) in self.generators.iter().enumerate() {
                if g.is_odd() && a.exponent(i) >= 1 && b.exponent(i) >= 1 {
                    return None;
                }
            }
            // moving each odd generator of b left past the odd generators
            // of a that sit at a later position
            let odd: Vec<usize> = (0..self.generators.len())
                .filter(|&i| self.generators[i].is_odd())
                .collect();
            for &i in &odd {
                for &j in &odd {
                    if i > j {
                        swaps += a.exponent(i) as u64 * b.exponent(j) as u64;
                    }
                }
            }
        }
        let exps = a
            .exponents()
            .iter()
            .zip(b.exponents())
            .map(|(&x, &y)| x + y)
            .collect();
        let sign = if swaps % 2 == 0 { 1 } else { -1 };
        Some((sign, Monomial::from_exponents(exps)))
    }

    /// Canonical normal form of a monomial: admissibility first, then the
    /// first applicable relation in presentation order, recursively. Each
    /// step strictly decreases degree-lex order, so this terminates; the
    /// construction-time confluence check makes the result strategy
    /// independent.
    pub fn reduce_monomial(&self, m: &Monomial) -> Element {
        if !self.is_admissible(m) {
            return Element::zero();
        }
        for rel in &self.relations {
            if rel.lead.divides(m) {
                let quot = m.quotient_by(&rel.lead);
                let mut acc = Element::zero();
                for (rm, rc) in &rel.rhs {
                    if let Some((sign, prod)) = self.mono_mul(rm, &quot) {
                        let c = if sign < 0 { self.field.neg(*rc) } else { *rc };
                        let reduced = self.reduce_monomial(&prod).scale(self.field, c);
                        acc = acc.add(self.field, &reduced);
                    }
                }
                return acc;
            }
        }
        let mut e = Element::zero();
        e.add_term(self.field, m.clone(), 1);
        e
    }

    /// Normal form of an arbitrary combination.
    pub fn reduce_element(&self, e: &Element) -> Element {
        let mut acc = Element::zero();
        for (m, c) in e.terms() {
            let r = self.reduce_monomial(m).scale(self.field, c);
            acc = acc.add(self.field, &r);
        }
        acc
    }

    fn check_confluence(&self) -> Result<()> {
        for degree in 0..=self.truncation {
            for m in enumerate_admissible(&self.generators, self.field.p(), degree) {
                let applicable: Vec<&Relation> = self
                    .relations
                    .iter()
                    .filter(|r| r.lead.divides(&m))
                    .collect();
                if applicable.len() < 2 {
                    continue;
                }
                let canonical = self.reduce_monomial(&m);
                for rel in applicable {
                    let quot = m.quotient_by(&rel.lead);
                    let mut after_step = Element::zero();
                    for (rm, rc) in &rel.rhs {
                        if let Some((sign, prod)) = self.mono_mul(rm, &quot) {
                            let c = if sign < 0 { self.field.neg(*rc) } else { *rc };
                            after_step.add_term(self.field, prod, c);
                        }
                    }
                    if self.reduce_element(&after_step) != canonical {
                        return Err(Error::NonConfluent {
                            monomial: self.format_monomial(&m),
                            degree,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Ordered basis of admissible normal-form monomials in one degree.
    pub fn monomial_basis(&self, degree: usize) -> Result<Vec<Monomial>> {
        if degree > self.truncation {
            return Err(Error::DegreeOutOfWindow {
                degree,
                truncation: self.truncation,
            });
        }
        Ok(enumerate_admissible(&self.generators, self.field.p(), degree)
            .into_iter()
            .filter(|m| !self.relations.iter().any(|r| r.lead.divides(m)))
            .collect())
    }

    /// Dimensions of the graded pieces over the whole window.
    pub fn poincare_polynomial(&self) -> Vec<usize> {
        (0..=self.truncation)
            .map(|d| self.monomial_basis(d).expect("degree inside window").len())
            .collect()
    }

    /// Graded-commutative product with normal-form output.
    pub fn multiply(&self, u: &Element, v: &Element) -> Result<Element> {
        let mut acc = Element::zero();
        for (m1, c1) in u.terms() {
            let d1 = m1.degree(&self.generators);
            for (m2, c2) in v.terms() {
                let d = d1 + m2.degree(&self.generators);
                if d > self.truncation {
                    return Err(Error::DegreeOverflow {
                        degree: d,
                        truncation: self.truncation,
                    });
                }
                if let Some((sign, prod)) = self.mono_mul(m1, m2) {
                    let mut c = self.field.mul(c1, c2);
                    if sign < 0 {
                        c = self.field.neg(c);
                    }
                    let reduced = self.reduce_monomial(&prod).scale(self.field, c);
                    acc = acc.add(self.field, &reduced);
                }
            }
        }
        Ok(acc)
    }

    pub fn power(&self, u: &Element, e: u32) -> Result<Element> {
        let mut acc = self.unit();
        for _ in 0..e {
            acc = self.multiply(&acc, u)?;
        }
        Ok(acc)
    }

    /// Matrix of left multiplication by a homogeneous element from the
    /// basis in `source_degree` to the basis in `source_degree + |alpha|`,
    /// columns indexed by source monomials.
    pub fn cup_map(&self, alpha: &Element, source_degree: usize) -> Result<FpMatrix> {
        let alpha_degree = alpha
            .degree(&self.generators)
            .ok_or(Error::WrongDegreeAlpha(None))?;
        let target_degree = source_degree + alpha_degree;
        if target_degree > self.truncation {
            return Err(Error::DegreeOverflow {
                degree: target_degree,
                truncation: self.truncation,
            });
        }
        let source = self.monomial_basis(source_degree)?;
        let target = self.monomial_basis(target_degree)?;
        let index: BTreeMap<&Monomial, usize> =
            target.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut mat = FpMatrix::zero(self.field, target.len(), source.len());
        for (j, m) in source.iter().enumerate() {
            let mut u = Element::zero();
            u.add_term(self.field, m.clone(), 1);
            let image = self.multiply(alpha, &u)?;
            for (tm, c) in image.terms() {
                let i = index
                    .get(tm)
                    .expect("normal form lands in the target basis");
                mat.set(*i, j, c);
            }
        }
        Ok(mat)
    }

    /// Coordinates of an element in the basis of its degree.
    pub fn coordinates(&self, e: &Element, degree: usize) -> Result<Vec<u32>> {
        let basis = self.monomial_basis(degree)?;
        let mut v = vec![0u32; basis.len()];
        for (m, c) in e.terms() {
            if m.degree(&self.generators) != degree {
                return Err(Error::WrongDegreeAlpha(e.degree(&self.generators)));
            }
            let i = basis
                .iter()
                .position(|b| b == m)
                .ok_or(Error::ForeignElement)?;
            v[i] = c;
        }
        Ok(v)
    }

    pub fn format_monomial(&self, m: &Monomial) -> String {
        format_monomial_raw(&self.generators, m)
    }

    pub fn format_element(&self, e: &Element) -> String {
        if e.is_zero() {
            return "0".to_string();
        }
        let mut terms: Vec<(&Monomial, u32)> = e.terms().collect();
        terms.sort_by(|a, b| deglex(&self.generators, a.0, b.0));
        let parts: Vec<String> = terms
            .iter()
            .map(|(m, c)| {
                if *c == 1 && !m.is_one() {
                    self.format_monomial(m)
                } else if m.is_one() {
                    format!("{c}")
                } else {
                    format!("{}*{}", c, self.format_monomial(m))
                }
            })
            .collect();
        parts.join(" + ")
    }

    /// Canonical JSON form: `{p, generators, relations, truncation,
    /// metadata}` with monomials as sorted exponent lists.
    pub fn to_json(&self) -> Value {
        let generators: Vec<Value> = self
            .generators
            .iter()
            .map(|g| json!({"name": g.name, "degree": g.degree}))
            .collect();
        let relations: Vec<Value> = self
            .relations
            .iter()
            .map(|r| {
                let rhs: Vec<Value> = r
                    .rhs
                    .iter()
                    .map(|(m, c)| json!({"coeff": c, "monomial": self.monomial_json(m)}))
                    .collect();
                json!({"lead": self.monomial_json(&r.lead), "rhs": rhs})
            })
            .collect();
        json!({
            "p": self.field.p(),
            "generators": generators,
            "relations": relations,
            "truncation": self.truncation,
            "metadata": self.metadata,
        })
    }

    pub fn monomial_json(&self, m: &Monomial) -> Value {
        let pairs: Vec<Value> = m
            .exponents()
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| json!([self.generators[i].name, e]))
            .collect();
        Value::Array(pairs)
    }

    pub fn element_json(&self, e: &Element) -> Value {
        let mut terms: Vec<(&Monomial, u32)> = e.terms().collect();
        terms.sort_by(|a, b| deglex(&self.generators, a.0, b.0));
        let arr: Vec<Value> = terms
            .iter()
            .map(|(m, c)| json!({"coeff": c, "monomial": self.monomial_json(m)}))
            .collect();
        Value::Array(arr)
    }

    /// Parse the canonical JSON form back into a validated presentation.
    pub fn from_json(v: &Value) -> Result<RingPresentation> {
        let bad = |msg: &str| Error::MalformedPresentation(msg.to_string());
        let p = v
            .get("p")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing p"))? as u32;
        let field = PrimeField::new(p)?;
        let gens_v = v
            .get("generators")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing generators"))?;
        let mut generators = Vec::new();
        for g in gens_v {
            let name = g
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("generator without name"))?;
            let degree = g
                .get("degree")
                .and_then(Value::as_u64)
                .ok_or_else(|| bad("generator without degree"))? as usize;
            generators.push(GeneratorSym::new(name, degree));
        }
        let parse_monomial = |mv: &Value| -> Result<Monomial> {
            let pairs = mv.as_array().ok_or_else(|| bad("monomial not a list"))?;
            let mut exps = vec![0u32; generators.len()];
            for pair in pairs {
                let pair = pair.as_array().ok_or_else(|| bad("bad monomial pair"))?;
                let name = pair
                    .first()
                    .and_then(Value::as_str)
                    .ok_or_else(|| bad("bad monomial pair"))?;
                let e = pair
                    .get(1)
                    .and_then(Value::as_u64)
                    .ok_or_else(|| bad("bad monomial pair"))? as u32;
                let idx = generators
                    .iter()
                    .position(|g| g.name == name)
                    .ok_or_else(|| bad("monomial uses unknown generator"))?;
                exps[idx] += e;
            }
            Ok(Monomial::from_exponents(exps))
        };
        let mut relations = Vec::new();
        for r in v
            .get("relations")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing relations"))?
        {
            let lead = parse_monomial(r.get("lead").ok_or_else(|| bad("relation without lead"))?)?;
            let mut rhs = Vec::new();
            for t in r
                .get("rhs")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("relation without rhs"))?
            {
                let c = t
                    .get("coeff")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| bad("rhs term without coeff"))? as u32;
                let m =
                    parse_monomial(t.get("monomial").ok_or_else(|| bad("rhs term monomial"))?)?;
                rhs.push((m, c));
            }
            relations.push(Relation { lead, rhs });
        }
        let truncation = v
            .get("truncation")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing truncation"))? as usize;
        let metadata = v
            .get("metadata")
            .and_then(Value::as_object)
            .map(|m| {
                m.iter()
                    .filter_map(|(k, val)| val.as_str().map(|s| (k.clone(), s.to_string())))
                    .collect()
            })
            .unwrap_or_default();
        RingPresentation::build(field, generators, relations, truncation, metadata)
    }

    /// LaTeX form mirroring the usual notation: exterior factor for the
    /// odd generators (odd p), truncated polynomial factor with the
    /// relation ideal for the rest.
    pub fn to_latex(&self) -> String {
        let p = self.field.p();
        let odd: Vec<&GeneratorSym> = if p == 2 {
            Vec::new()
        } else {
            self.generators.iter().filter(|g| g.is_odd()).collect()
        };
        let even: Vec<&GeneratorSym> = self
            .generators
            .iter()
            .filter(|g| p == 2 || !g.is_odd())
            .collect();
        let mut out = String::new();
        if !odd.is_empty() {
            let names: Vec<String> = odd.iter().map(|g| latex_name(&g.name)).collect();
            write!(out, "\\wedge({})", names.join(",")).unwrap();
        }
        if even.is_empty() && odd.is_empty() {
            return format!("\\mathbb{{Z}}_{{{p}}}");
        }
        if !even.is_empty() {
            if !odd.is_empty() {
                out.push_str("\\otimes ");
            }
            let names: Vec<String> = even.iter().map(|g| latex_name(&g.name)).collect();
            write!(out, "\\mathbb{{Z}}_{{{p}}}[{}]", names.join(",")).unwrap();
        } else {
            // purely exterior algebra: coefficients still need to show
            out = format!("\\mathbb{{Z}}_{{{p}}}\\otimes {out}");
        }
        if !self.relations.is_empty() {
            let rels: Vec<String> = self
                .relations
                .iter()
                .map(|r| {
                    let lead = self.latex_monomial(&r.lead);
                    if r.rhs.is_empty() {
                        lead
                    } else {
                        let rhs: Vec<String> = r
                            .rhs
                            .iter()
                            .map(|(m, c)| {
                                if *c == 1 {
                                    self.latex_monomial(m)
                                } else {
                                    format!("{}{}", c, self.latex_monomial(m))
                                }
                            })
                            .collect();
                        format!("{lead}-{}", rhs.join("-"))
                    }
                })
                .collect();
            write!(out, "/\\langle {}\\rangle", rels.join(", ")).unwrap();
        }
        out
    }

    pub fn latex_monomial(&self, m: &Monomial) -> String {
        if m.is_one() {
            return "1".to_string();
        }
        let mut out = String::new();
        for (i, &e) in m.exponents().iter().enumerate() {
            if e == 0 {
                continue;
            }
            out.push_str(&latex_name(&self.generators[i].name));
            if e > 1 {
                write!(out, "^{{{e}}}").unwrap();
            }
        }
        out
    }
}

/// Degree-lex comparison: total degree first, then exponent vectors
/// lexicographically with the first generator most significant.
pub fn deglex(generators: &[GeneratorSym], a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    let da = a.degree(generators);
    let db = b.degree(generators);
    da.cmp(&db).then_with(|| a.exponents().cmp(b.exponents()))
}

/// All admissible exponent vectors of an exact degree, in degree-lex
/// order.
fn enumerate_admissible(generators: &[GeneratorSym], p: u32, degree: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut current = vec![0u32; generators.len()];
    fn recurse(
        generators: &[GeneratorSym],
        p: u32,
        idx: usize,
        remaining: usize,
        current: &mut Vec<u32>,
        out: &mut Vec<Monomial>,
    ) {
        if idx == generators.len() {
            if remaining == 0 {
                out.push(Monomial::from_exponents(current.clone()));
            }
            return;
        }
        let g = &generators[idx];
        let cap = remaining / g.degree;
        let cap = if p != 2 && g.is_odd() {
            cap.min(1)
        } else {
            cap
        };
        for e in 0..=cap as u32 {
            current[idx] = e;
            recurse(
                generators,
                p,
                idx + 1,
                remaining - e as usize * g.degree,
                current,
                out,
            );
        }
        current[idx] = 0;
    }
    recurse(generators, p, 0, degree, &mut current, &mut out);
    out
}

fn format_monomial_raw(generators: &[GeneratorSym], m: &Monomial) -> String {
    if m.is_one() {
        return "1".to_string();
    }
    let mut parts = Vec::new();
    for (i, &e) in m.exponents().iter().enumerate() {
        if e == 0 {
            continue;
        }
        if e == 1 {
            parts.push(generators[i].name.clone());
        } else {
            parts.push(format!("{}^{}", generators[i].name, e));
        }
    }
    parts.join("*")
}

/// `y11` renders as `y_{11}`; plain names pass through.
fn latex_name(name: &str) -> String {
    let split = name.find(|c: char| c.is_ascii_digit());
    match split {
        Some(i) if i > 0 => format!("{}_{{{}}}", &name[..i], &name[i..]),
        _ => name.to_string(),
    }
}

/// The model rings used throughout: lens-space and projective-space
/// cohomology, truncated polynomial orbit models, and the truncated
/// classifying-space model for the circle group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Exterior(a) tensor Z_p[b]/(b^m), deg a = 1, deg b = 2; odd p.
    Lens { p: u32, m: usize },
    /// Z_2[a]/(a^{2m}), deg a = 1.
    RpOddMod2 { m: usize },
    /// Z_p[z]/(z^m), deg z = 2.
    Cp { p: u32, m: usize },
    /// Z_p[t]/(t^{k+1}), deg t = 2: the 2k-skeleton model of the
    /// classifying space of the circle.
    BgTrunc { p: u32, k: usize },
}

pub fn model_space(kind: ModelKind) -> Result<RingPresentation> {
    match kind {
        ModelKind::Lens { p, m } => {
            if p == 2 {
                return Err(Error::InvalidParams(
                    "lens model needs odd p; use the mod-2 projective model".into(),
                ));
            }
            if m == 0 {
                return Err(Error::InvalidParams("lens model needs m >= 1".into()));
            }
            let field = PrimeField::new(p)?;
            let gens = vec![GeneratorSym::new("a", 1), GeneratorSym::new("b", 2)];
            let b_m = Monomial::from_pairs(&gens, &[("b", m as u32)])?;
            let mut metadata = BTreeMap::new();
            metadata.insert("space".into(), format!("lens({p};{m})"));
            metadata.insert(
                "orientation_parameters".into(),
                vec!["1"; m].join(","),
            );
            metadata.insert("bockstein".into(), "beta(a) = b".into());
            RingPresentation::build(field, gens, vec![Relation::vanishing(b_m)], 2 * m, metadata)
        }
        ModelKind::RpOddMod2 { m } => {
            if m == 0 {
                return Err(Error::InvalidParams("projective model needs m >= 1".into()));
            }
            let field = PrimeField::new(2)?;
            let gens = vec![GeneratorSym::new("a", 1)];
            let a_top = Monomial::from_pairs(&gens, &[("a", 2 * m as u32)])?;
            let mut metadata = BTreeMap::new();
            metadata.insert("space".into(), format!("real-projective({})", 2 * m - 1));
            RingPresentation::build(
                field,
                gens,
                vec![Relation::vanishing(a_top)],
                2 * m,
                metadata,
            )
        }
        ModelKind::Cp { p, m } => {
            if m == 0 {
                return Err(Error::InvalidParams("orbit model needs m >= 1".into()));
            }
            let field = PrimeField::new(p)?;
            let gens = vec![GeneratorSym::new("z", 2)];
            let z_m = Monomial::from_pairs(&gens, &[("z", m as u32)])?;
            let mut metadata = BTreeMap::new();
            metadata.insert("space".into(), format!("complex-projective({})", m - 1));
            RingPresentation::build(
                field,
                gens,
                vec![Relation::vanishing(z_m)],
                2 * m + 2,
                metadata,
            )
        }
        ModelKind::BgTrunc { p, k } => {
            if k == 0 {
                return Err(Error::InvalidParams(
                    "classifying-space model needs k >= 1".into(),
                ));
            }
            let field = PrimeField::new(p)?;
            let gens = vec![GeneratorSym::new("t", 2)];
            let t_top = Monomial::from_pairs(&gens, &[("t", k as u32 + 1)])?;
            let mut metadata = BTreeMap::new();
            metadata.insert("space".into(), format!("bg-circle-skeleton({k})"));
            RingPresentation::build(
                field,
                gens,
                vec![Relation::vanishing(t_top)],
                2 * k + 2,
                metadata,
            )
        }
    }
}

/// The predicted orbit-space ring for the odd-prime run in which the
/// degree-2 fiber class transgresses: Z_p[x, y_1, y_3, ..., y_{2p-3}, z]
/// modulo x^p, z^n, x y_q, and all products of distinct odd generators,
/// with deg x = 2 and deg z = 2p.
pub fn case_i_orbit_ring(p: u32, n: usize, truncation: usize) -> Result<RingPresentation> {
    if p == 2 || !crate::field::is_prime(p) {
        return Err(Error::InvalidParams("case I needs an odd prime".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParams("case I needs n >= 1".into()));
    }
    let field = PrimeField::new(p)?;
    let mut gens = vec![GeneratorSym::new("x", 2)];
    let mut odd_names = Vec::new();
    let mut q = 1usize;
    while q <= 2 * p as usize - 3 {
        let name = format!("y{q}");
        gens.push(GeneratorSym::new(&name, q));
        odd_names.push(name);
        q += 2;
    }
    gens.push(GeneratorSym::new("z", 2 * p as usize));
    let mut relations = vec![
        Relation::vanishing(Monomial::from_pairs(&gens, &[("x", p)])?),
        Relation::vanishing(Monomial::from_pairs(&gens, &[("z", n as u32)])?),
    ];
    for name in &odd_names {
        relations.push(Relation::vanishing(Monomial::from_pairs(
            &gens,
            &[("x", 1), (name.as_str(), 1)],
        )?));
    }
    for (i, a) in odd_names.iter().enumerate() {
        for b in &odd_names[i + 1..] {
            relations.push(Relation::vanishing(Monomial::from_pairs(
                &gens,
                &[(a.as_str(), 1), (b.as_str(), 1)],
            )?));
        }
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("space".into(), format!("orbit-case-i(p={p},n={n})"));
    RingPresentation::build(field, gens, relations, truncation, metadata)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lens(p: u32, m: usize) -> RingPresentation {
        model_space(ModelKind::Lens { p, m }).unwrap()
    }

    /// Independent enumeration oracle for the lens ring: monomials
    /// a^e b^j with e in {0,1}, j < m, of the requested degree.
    fn lens_basis_oracle(m: usize, degree: usize) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for e in 0..=1u32 {
            for j in 0..m as u32 {
                if e as usize + 2 * j as usize == degree {
                    out.push((e, j));
                }
            }
        }
        out
    }

    #[test]
    fn lens_basis_matches_enumeration_oracle() {
        for (p, m) in [(3u32, 3usize), (5, 5), (7, 2)] {
            let pres = lens(p, m);
            for degree in 0..=2 * m {
                let got: Vec<(u32, u32)> = pres
                    .monomial_basis(degree)
                    .unwrap()
                    .iter()
                    .map(|mo| (mo.exponent(0), mo.exponent(1)))
                    .collect();
                let mut want = lens_basis_oracle(m, degree);
                want.sort();
                let mut got_sorted = got.clone();
                got_sorted.sort();
                assert_eq!(got_sorted, want, "p={p} m={m} degree={degree}");
            }
        }
    }

    #[test]
    fn lens_degree_three_basis_is_ab() {
        let pres = lens(3, 3);
        let basis = pres.monomial_basis(3).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(pres.format_monomial(&basis[0]), "a*b");
    }

    #[test]
    fn lens_degree_zero_basis_is_unit() {
        let pres = lens(3, 3);
        let basis = pres.monomial_basis(0).unwrap();
        assert_eq!(basis.len(), 1);
        assert!(basis[0].is_one());
    }

    #[test]
    fn rp3_degree_two_basis_is_a_squared() {
        let pres = model_space(ModelKind::RpOddMod2 { m: 2 }).unwrap();
        let basis = pres.monomial_basis(2).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(pres.format_monomial(&basis[0]), "a^2");
    }

    #[test]
    fn empty_presentation_is_the_field() {
        let pres = RingPresentation::build(
            PrimeField::new(5).unwrap(),
            vec![],
            vec![],
            0,
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(pres.poincare_polynomial(), vec![1]);
    }

    #[test]
    fn odd_generator_squares_to_zero() {
        let pres = lens(3, 3);
        let a = pres.generator_element("a").unwrap();
        assert!(pres.multiply(&a, &a).unwrap().is_zero());
    }

    #[test]
    fn truncating_relation_kills_top_power() {
        let pres = lens(3, 3);
        let b = pres.generator_element("b").unwrap();
        let b2 = pres.multiply(&b, &b).unwrap();
        assert!(pres.multiply(&b2, &b).unwrap().is_zero());
    }

    #[test]
    fn normal_form_product() {
        let pres = lens(5, 5);
        let ab = pres.element(1, &[("a", 1), ("b", 1)]).unwrap();
        let b = pres.generator_element("b").unwrap();
        let got = pres.multiply(&ab, &b).unwrap();
        let want = pres.element(1, &[("a", 1), ("b", 2)]).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn poincare_lens_is_all_ones() {
        // all-ones through degree 2m-1, zero at 2m
        for (p, m) in [(3u32, 3usize), (5, 2), (7, 4)] {
            let pres = lens(p, m);
            let dims = pres.poincare_polynomial();
            let mut want = vec![1usize; 2 * m];
            want.push(0);
            assert_eq!(dims, want, "p={p} m={m}");
        }
    }

    #[test]
    fn poincare_truncated_polynomial() {
        // dims [1,0,1,0,1,0,1] on degrees 0..6 for z^4 = 0, deg z = 2
        let pres = model_space(ModelKind::Cp { p: 5, m: 4 }).unwrap();
        let dims = pres.poincare_polynomial();
        assert_eq!(&dims[0..=6], &[1, 0, 1, 0, 1, 0, 1]);
        assert!(dims[7..].iter().all(|&d| d == 0));
    }

    #[test]
    fn bg_model_has_even_ones() {
        let pres = model_space(ModelKind::BgTrunc { p: 3, k: 4 }).unwrap();
        let dims = pres.poincare_polynomial();
        for d in 0..=8 {
            assert_eq!(dims[d], usize::from(d % 2 == 0), "degree {d}");
        }
        assert_eq!(dims[10], 0); // t^5 = 0
    }

    #[test]
    fn graded_commutativity_and_associativity_exhaustive() {
        let pres = lens(3, 3);
        let f = pres.field();
        let mut basis_elements = Vec::new();
        for d in 0..=pres.truncation() {
            for m in pres.monomial_basis(d).unwrap() {
                let mut e = Element::zero();
                e.add_term(f, m.clone(), 1);
                basis_elements.push((d, e));
            }
        }
        for (du, u) in &basis_elements {
            for (dv, v) in &basis_elements {
                if du + dv > pres.truncation() {
                    continue;
                }
                let uv = pres.multiply(u, v).unwrap();
                let vu = pres.multiply(v, u).unwrap();
                let expect = if du % 2 == 1 && dv % 2 == 1 {
                    vu.scale(f, f.neg(1))
                } else {
                    vu
                };
                assert_eq!(uv, expect, "commutativity {du} {dv}");
                for (dw, w) in &basis_elements {
                    if du + dv + dw > pres.truncation() {
                        continue;
                    }
                    let left = pres.multiply(&uv, w).unwrap();
                    let right = pres.multiply(u, &pres.multiply(v, w).unwrap()).unwrap();
                    assert_eq!(left, right, "associativity {du} {dv} {dw}");
                }
            }
        }
    }

    #[test]
    fn cup_map_on_truncated_polynomial() {
        let pres = model_space(ModelKind::Cp { p: 5, m: 4 }).unwrap();
        let z = pres.generator_element("z").unwrap();
        let m1 = pres.cup_map(&z, 2).unwrap();
        assert_eq!((m1.rows(), m1.cols()), (1, 1));
        assert_eq!(m1.get(0, 0), 1); // z * z = z^2
        let m2 = pres.cup_map(&z, 6).unwrap();
        assert_eq!(m2.get(0, 0), 0); // z * z^3 = z^4 = 0
    }

    #[test]
    fn cup_map_kills_odd_generators_in_orbit_ring() {
        let pres = case_i_orbit_ring(3, 1, 6).unwrap();
        let x = pres.generator_element("x").unwrap();
        let m = pres.cup_map(&x, 1).unwrap(); // y1 -> x*y1 = 0
        assert!(m.is_zero());
    }

    #[test]
    fn case_i_orbit_ring_dims() {
        // p = 3, n = 1: dims 1,1,1,1,1 then 0 at degree 5 = 2*3 - 1
        let pres = case_i_orbit_ring(3, 1, 6).unwrap();
        assert_eq!(pres.poincare_polynomial(), vec![1, 1, 1, 1, 1, 0, 0]);
        // p = 3, n = 2: zero exactly at 5 and 11 within 0..=10
        let pres = case_i_orbit_ring(3, 2, 12).unwrap();
        let dims = pres.poincare_polynomial();
        for j in 0..=10 {
            assert_eq!(dims[j], usize::from(j != 5), "degree {j}");
        }
        assert_eq!(dims[11], 0);
        assert_eq!(dims[12], 0);
    }

    #[test]
    fn rejects_duplicate_generators() {
        let err = RingPresentation::build(
            PrimeField::new(3).unwrap(),
            vec![GeneratorSym::new("a", 1), GeneratorSym::new("a", 2)],
            vec![],
            4,
            BTreeMap::new(),
        )
        .unwrap_err();
        assert_eq!(err, Error::DuplicateGenerator("a".into()));
    }

    #[test]
    fn rejects_non_homogeneous_relation() {
        let gens = vec![GeneratorSym::new("u", 2), GeneratorSym::new("v", 4)];
        let lead = Monomial::from_pairs(&gens, &[("v", 1)]).unwrap();
        let term = Monomial::from_pairs(&gens, &[("u", 2)]).unwrap();
        // v -> u^2 is homogeneous (4 = 4); v -> u is not
        let ok = RingPresentation::build(
            PrimeField::new(3).unwrap(),
            gens.clone(),
            vec![Relation {
                lead: lead.clone(),
                rhs: vec![(term, 1)],
            }],
            8,
            BTreeMap::new(),
        );
        assert!(ok.is_ok());
        let bad_term = Monomial::from_pairs(&gens, &[("u", 1)]).unwrap();
        let err = RingPresentation::build(
            PrimeField::new(3).unwrap(),
            gens,
            vec![Relation {
                lead,
                rhs: vec![(bad_term, 1)],
            }],
            8,
            BTreeMap::new(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonHomogeneousRelation { .. }));
    }

    #[test]
    fn rejects_order_increasing_rewrite() {
        let gens = vec![GeneratorSym::new("u", 2), GeneratorSym::new("v", 2)];
        // u -> v increases lex order (u = (1,0) > v = (0,1)), fine.
        // v -> u would loop together with it; already v -> u alone is
        // rejected because u is deg-lex larger than v.
        let lead = Monomial::from_pairs(&gens, &[("v", 1)]).unwrap();
        let term = Monomial::from_pairs(&gens, &[("u", 1)]).unwrap();
        let err = RingPresentation::build(
            PrimeField::new(3).unwrap(),
            gens,
            vec![Relation {
                lead,
                rhs: vec![(term, 1)],
            }],
            4,
            BTreeMap::new(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonterminatingRewrite { .. }));
    }

    #[test]
    fn degree_out_of_window_errors() {
        let pres = lens(3, 3);
        assert!(matches!(
            pres.monomial_basis(7),
            Err(Error::DegreeOutOfWindow { .. })
        ));
        let b = pres.generator_element("b").unwrap();
        let b2 = pres.multiply(&b, &b).unwrap();
        let b3 = pres.multiply(&b2, &b).unwrap(); // zero, fine
        assert!(b3.is_zero());
        let err = pres.multiply(&b2, &b2).unwrap_err(); // degree 8 > 6
        assert!(matches!(err, Error::DegreeOverflow { .. }));
    }

    #[test]
    fn lens_rejects_p_equal_two() {
        assert!(model_space(ModelKind::Lens { p: 2, m: 3 }).is_err());
    }

    #[test]
    fn rejects_composite_p() {
        assert!(model_space(ModelKind::Lens { p: 4, m: 3 }).is_err());
    }

    #[test]
    fn json_round_trip() {
        for pres in [
            lens(3, 3),
            model_space(ModelKind::Cp { p: 5, m: 4 }).unwrap(),
            case_i_orbit_ring(3, 2, 12).unwrap(),
        ] {
            let v = pres.to_json();
            let back = RingPresentation::from_json(&v).unwrap();
            assert_eq!(pres, back);
            assert_eq!(
                serde_json::to_string(&v).unwrap(),
                serde_json::to_string(&back.to_json()).unwrap()
            );
        }
    }

    #[test]
    fn latex_of_models() {
        assert_eq!(
            lens(3, 3).to_latex(),
            "\\wedge(a)\\otimes \\mathbb{Z}_{3}[b]/\\langle b^{3}\\rangle"
        );
        assert_eq!(
            model_space(ModelKind::RpOddMod2 { m: 2 }).unwrap().to_latex(),
            "\\mathbb{Z}_{2}[a]/\\langle a^{4}\\rangle"
        );
        let t1 = case_i_orbit_ring(3, 1, 6).unwrap().to_latex();
        assert!(t1.contains("y_{1}"), "{t1}");
        assert!(t1.contains("x^{3}"), "{t1}");
    }

    #[test]
    fn confluence_check_accepts_overlapping_monomial_relations() {
        // x*y and y*z overlap at x*y*z; monomial rewrites are confluent
        let gens = vec![
            GeneratorSym::new("u", 2),
            GeneratorSym::new("v", 2),
            GeneratorSym::new("w", 2),
        ];
        let uv = Monomial::from_pairs(&gens, &[("u", 1), ("v", 1)]).unwrap();
        let vw = Monomial::from_pairs(&gens, &[("v", 1), ("w", 1)]).unwrap();
        let pres = RingPresentation::build(
            PrimeField::new(3).unwrap(),
            gens,
            vec![Relation::vanishing(uv), Relation::vanishing(vw)],
            8,
            BTreeMap::new(),
        );
        assert!(pres.is_ok());
    }

    #[test]
    fn confluence_check_rejects_ambiguous_rewrites() {
        // u^2 -> v*w and u^2 -> 0 disagree on u^2
        let gens = vec![
            GeneratorSym::new("v", 2),
            GeneratorSym::new("w", 2),
            GeneratorSym::new("u", 2),
        ];
        let u2 = Monomial::from_pairs(&gens, &[("u", 2)]).unwrap();
        let vw = Monomial::from_pairs(&gens, &[("v", 1), ("w", 1)]).unwrap();
        let err = RingPresentation::build(
            PrimeField::new(3).unwrap(),
            gens,
            vec![
                Relation {
                    lead: u2.clone(),
                    rhs: vec![(vw, 1)],
                },
                Relation::vanishing(u2),
            ],
            4,
            BTreeMap::new(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonConfluent { .. }));
    }
}

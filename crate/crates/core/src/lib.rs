//! Exact mod-p engine for the cohomology of orbit spaces of free circle
//! actions.
//!
//! The crate provides four layers:
//!
//! * [`algebra`] — finitely presented graded-commutative algebras over a
//!   prime field with canonical normal forms, graded bases, and cup
//!   products, plus builders for the standard model rings (lens spaces,
//!   odd real projective spaces, truncated polynomial orbit models, and
//!   the truncated classifying space of the circle).
//! * [`specseq`] — the first-quadrant spectral sequence of the associated
//!   Borel fibration on a finite bidegree window: tensor-product second
//!   page, differentials given on generators and extended by the Leibniz
//!   rule, page turning by exact rank computations, collapse detection,
//!   and comparison of the limit term against a candidate presentation.
//! * [`gysin`] — Betti-level bookkeeping for the long exact sequence of
//!   the circle bundle over the orbit space: predicted total-space
//!   dimensions from cup-product ranks, the vanishing criterion above the
//!   dimension of the total space, and the mod-p index of the action.
//! * [`scenarios`] — named end-to-end runs with machine-checked verdicts
//!   covering the classification of orbit-space rings for odd p and for
//!   p = 2, the divisibility obstruction, the necessity of the late
//!   transgression, and the quotient families realizing the results.

pub mod algebra;
pub mod error;
pub mod field;
pub mod gysin;
pub mod linalg;
pub mod scenarios;
pub mod specseq;

pub use algebra::{
    case_i_orbit_ring, deglex, model_space, Element, GeneratorSym, ModelKind, Monomial, Relation,
    RingPresentation,
};
pub use error::{Error, Result};
pub use field::PrimeField;
pub use gysin::{
    mod_p_index, pushforward_dims, verify_vanishing, CharacteristicClass, GysinPrediction,
    GysinReport, ModPIndex, VanishingReport,
};
pub use linalg::{FpMatrix, Subspace};
pub use scenarios::{
    d2_survey, forced_divisibility, hopf_quotient, no_transgression, run_case_i, run_case_ii,
    run_mod2, Check, ScenarioInputs, ScenarioReport, Verdict,
};
pub use specseq::{
    build_e2, total_dims, BigradedPage, ClassRef, DifferentialSpec, PageTranscript, TensorMonomial,
    Window,
};

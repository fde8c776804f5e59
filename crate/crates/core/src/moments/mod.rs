//! Integer price moments through the I/J word expansion.
//!
//! `E[P_T^N]` is a sum over words `w` with `ℓ(w) = N` of nested simplex
//! integrals. Letters are applied right to left to the power `N`: `J` lowers
//! the power by two and brings `σ_p² k(k-1)/2 · e^{2V_s}`, `I` lowers it by
//! one and brings `ρσ_pσ_v k · e^{V_s} Σ_j a_j φ(t_j - s)`.

mod engine;
mod expand;
mod words;

pub use engine::{
    gaussian_exp_moment, hermite4, hermite4_from_moments, moment_value, MomentEstimate,
    MomentModel, MomentParams, QuadratureOptions,
};
pub use expand::{expand_word, MomentTerm};
pub use words::{enumerate_words, Letter, Word, MAX_WORD_LENGTH};

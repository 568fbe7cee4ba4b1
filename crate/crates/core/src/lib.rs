//! Component-based software reliability from Goel–Okumoto NHPP fits.
//!
//! Component failure data is fitted per component ([`gofit`]), the
//! components' unconditional reliabilities are composed along execution
//! paths by a convolution-based moving average ([`ma`], backed by the
//! exponential-polynomial algebra in [`expconv`]), and paths are combined
//! into conditional system reliability ([`sysmodel`]).

mod dd;
pub mod expconv;
pub mod quadrature;
pub mod ma;
pub mod datasets;
pub mod gofit;
pub mod simgen;
pub mod sysmodel;
pub mod curves;
pub mod reference;

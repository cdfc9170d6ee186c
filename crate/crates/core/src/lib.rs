//! Formal Drinfeld modules over local function fields, their torsion towers, and an
//! explicit reciprocity pairing on those towers.

mod cache;
pub mod coleman;
pub mod drinfeld;
pub mod error;
pub mod linalg;
pub mod poly;
pub mod reciprocity;
pub mod residue;
pub mod sample;
pub mod tower;
pub mod twisted;
pub mod verify;

pub use drinfeld::{DrinfeldModule, Prepared};
pub use error::{Error, Result};
pub use poly::XPoly;
pub use residue::{Fe, FieldSpec, LaurentError, LaurentNum, LocalField, EXACT};
pub use tower::{SeriesLift, Tower, TowerElem, TowerLevel};
pub use twisted::{FrobeniusModule, InvertMode, TailBound, TwistedSeries};

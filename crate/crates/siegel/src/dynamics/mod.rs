//! Quadratic dynamics: P_α and its orbits, the linearizer φ_α, parabolic
//! explosion cycles χ_n, and the renormalized-coordinate map f_n.

pub mod explosion;
pub mod exploded;
pub mod linearizer;
pub mod quadratic;

pub use explosion::{explosion_cycle, explosion_cycle_prec, ExplosionCycle, ExplosionSeries, SeriesOptions};
pub use exploded::{ChiMode, ExplodedMapContext};
pub use linearizer::{linearizer, LinearizerSeries};
pub use quadratic::{OrbitEnd, QuadraticMap};

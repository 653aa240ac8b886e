//! Constructive machinery for linear size-Ramsey bounds on uniform tight
//! paths, runnable and certifiable at desk scale.
//!
//! The crate is organised around six subsystems:
//!
//! * [`forest`] — ordered rooted forests, types, monomorphisms and the
//!   extension calculus used to grow trees one vertex at a time;
//! * [`ground`] / [`sforest`] — ground graphs with a BFS distance oracle,
//!   and S-forests (families of trees indexed by ground vertices) with
//!   projections, root deletion and augmentation;
//! * [`hypergraph`] — r-uniform hypergraphs, tight walks, graph powers,
//!   tensor products and blow-ups;
//! * [`expander`] — generation and verification of bounded-degree vertex
//!   expanders;
//! * [`ramsey`] / [`cleaning`] / [`versatile`] — the constructive Ramsey
//!   lemmas: bipartite and multipartite path-vs-clique arguments, tree
//!   separation and cleaning, versatile leaf sets and walk rerouting;
//! * [`schedule`] / [`pipeline`] — the iterative colouring-structure engine
//!   that either extracts a certified monochromatic tight walk or reports
//!   the structural state it reached, with every property independently
//!   re-verified.
//!
//! Every search routine takes an explicit seed and is deterministic for a
//! fixed seed. Witnesses are always re-verified before being returned;
//! asymptotic guarantees that cannot hold at small parameters surface as
//! structured reports instead of panics.

pub mod cleaning;
pub mod colouring;
pub mod expander;
pub mod forest;
pub mod ground;
pub mod hypergraph;
pub mod pipeline;
pub mod ramsey;
pub mod schedule;
pub mod sforest;
pub mod textio;
pub mod versatile;

pub use forest::{ForestType, Monomorphism, OrderedForest};
pub use ground::GroundGraph;
pub use hypergraph::{Hypergraph, TightWalk};
pub use sforest::{SForest, STree};

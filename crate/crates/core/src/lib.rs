//! Column generation for the VRPTW linear relaxation, with a learned
//! arc-selection heuristic for the pricing problem.
//!
//! The crate is organised around the classic master/pricing split:
//!
//! * [`ingest`] reads and writes Solomon-format instances, tightens time
//!   windows, and generates seeded synthetic instances.
//! * [`net`] turns an instance into the pricing network (source/sink depot
//!   split, feasibility-pruned arcs, per-arc resource consumptions).
//! * [`pricing`] solves the shortest-path problem with resource constraints
//!   and 2-cycle elimination by label setting.
//! * [`enumerate`] cross-checks the label solver by exhaustive route
//!   enumeration on small networks.
//! * [`rmp`] holds the restricted master problem: a set-partitioning LP over
//!   the column pool, solved by a bundled revised simplex.
//! * [`cg`] drives the column-generation loop for every solve strategy and
//!   the data-collection pass.
//! * [`features`] extracts and normalizes per-arc feature vectors and reads
//!   and writes dataset files.
//! * [`learn`] trains, evaluates, serializes, and applies the arc
//!   classifiers (logistic regression and random forest).

pub mod cg;
pub mod enumerate;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod net;
pub mod pricing;
pub mod rmp;
pub mod seed;

//! The pricing network: a source/sink depot split over the instance's
//! customers, with arcs pruned by pairwise time-window and capacity checks
//! and annotated with per-resource consumptions.

use thiserror::Error;

use crate::ingest::VrptwInstance;

/// Resource indices into [`ResVec`]. Time accumulates service and travel;
/// load accumulates demand.
pub const R_TIME: usize = 0;
pub const R_LOAD: usize = 1;
pub const NUM_RES: usize = 2;

/// One value per constrained resource, indexed by [`R_TIME`] / [`R_LOAD`].
pub type ResVec = [f64; NUM_RES];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Source,
    Customer,
    Sink,
}

#[derive(Debug, Clone)]
pub struct NodeData {
    pub id: usize,
    pub kind: NodeKind,
    /// Resource windows: time window from the instance (depot's for source
    /// and sink), load window [0, capacity] everywhere.
    pub window_lo: ResVec,
    pub window_hi: ResVec,
    pub demand: f64,
    pub service: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct ArcData {
    pub id: usize,
    pub tail: usize,
    pub head: usize,
    /// Travel cost: exact Euclidean distance between the endpoints.
    pub cost: f64,
    /// consumption[R_TIME] = service(tail) + travel(tail, head);
    /// consumption[R_LOAD] = demand(head).
    pub consumption: ResVec,
    /// Master-row index covered by traversing this arc: `Some(head - 1)`
    /// when the head is a customer.
    pub covered_row: Option<usize>,
}

/// Directed pricing network. Node 0 is the source depot copy, nodes
/// `1..=n` the customers, node `n + 1` the sink depot copy.
#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<NodeData>,
    pub arcs: Vec<ArcData>,
    /// Outgoing / incoming arc ids per node.
    pub out_arcs: Vec<Vec<usize>>,
    pub in_arcs: Vec<Vec<usize>>,
    pub capacity: f64,
    pub is_reduced: bool,
    /// For a reduced network, arc id -> id in the network it was reduced
    /// from; the identity for a freshly built one.
    pub parent_arc_ids: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("customer {id}: single-customer route depot -> {id} -> depot is infeasible ({reason})")]
    InfeasibleCustomer { id: usize, reason: String },
    #[error("arc {tail} -> {head} has non-positive time consumption {consumption}; give customers a positive service time or distinct coordinates")]
    ZeroTimeArc {
        tail: usize,
        head: usize,
        consumption: f64,
    },
}

impl Network {
    pub fn n_customers(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Customer node id -> master row index.
    pub fn row_of(&self, node: usize) -> usize {
        debug_assert!(matches!(self.nodes[node].kind, NodeKind::Customer));
        node - 1
    }

    /// An arc is selectable when both endpoints are customers; only these
    /// arcs are subject to arc selection, feature extraction, and labeling.
    pub fn is_selectable(&self, arc_id: usize) -> bool {
        let a = &self.arcs[arc_id];
        a.tail != self.source() && a.head != self.sink()
    }

    pub fn selectable_arc_ids(&self) -> Vec<usize> {
        (0..self.arcs.len()).filter(|&a| self.is_selectable(a)).collect()
    }

    /// First arc tail -> head, if present.
    pub fn find_arc(&self, tail: usize, head: usize) -> Option<usize> {
        self.out_arcs[tail].iter().copied().find(|&a| self.arcs[a].head == head)
    }

    /// Travel cost of a depot-to-depot route given as node ids.
    pub fn route_cost(&self, route: &[usize]) -> f64 {
        route
            .windows(2)
            .map(|w| {
                let a = self.find_arc(w[0], w[1]).expect("route uses a missing arc");
                self.arcs[a].cost
            })
            .sum()
    }
}

fn euclid_nodes(a: &NodeData, b: &NodeData) -> f64 {
    crate::ingest::euclid(a.x, a.y, b.x, b.y)
}

/// Builds the full pricing network for an instance.
///
/// Candidate arcs are source -> customer, customer -> customer (distinct),
/// and customer -> sink. A candidate is dropped when the earliest possible
/// departure already misses the head's window
/// (`window_lo_time(tail) + consumption_time > window_hi_time(head)`) or
/// when the endpoint demands cannot share a vehicle
/// (`demand(tail) + demand(head) > capacity`).
///
/// Fails if any customer cannot be served by its single-customer route, or
/// if a surviving customer-to-customer arc has non-positive time
/// consumption (which would let zero-duration cycles through the labeling).
pub fn build_network(inst: &VrptwInstance) -> Result<Network, NetError> {
    let n = inst.n_customers();
    let q = inst.vehicle_capacity;
    let mut nodes = Vec::with_capacity(n + 2);
    nodes.push(NodeData {
        id: 0,
        kind: NodeKind::Source,
        window_lo: [inst.depot.ready, 0.0],
        window_hi: [inst.depot.due, q],
        demand: 0.0,
        service: 0.0,
        x: inst.depot.x,
        y: inst.depot.y,
    });
    for c in &inst.customers {
        nodes.push(NodeData {
            id: c.id,
            kind: NodeKind::Customer,
            window_lo: [c.ready, 0.0],
            window_hi: [c.due, q],
            demand: c.demand,
            service: c.service,
            x: c.x,
            y: c.y,
        });
    }
    nodes.push(NodeData {
        id: n + 1,
        kind: NodeKind::Sink,
        window_lo: [inst.depot.ready, 0.0],
        window_hi: [inst.depot.due, q],
        demand: 0.0,
        service: 0.0,
        x: inst.depot.x,
        y: inst.depot.y,
    });

    for c in &inst.customers {
        if !crate::ingest::singleton_feasible(inst, c) {
            let reason = if c.demand > q {
                format!("demand {} exceeds capacity {}", c.demand, q)
            } else {
                "the depot windows and travel times leave no feasible schedule".to_string()
            };
            return Err(NetError::InfeasibleCustomer { id: c.id, reason });
        }
    }

    let mut arcs: Vec<ArcData> = Vec::new();
    let push = |arcs: &mut Vec<ArcData>, tail: usize, head: usize| -> Result<(), NetError> {
        let (t, h) = (&nodes[tail], &nodes[head]);
        let cost = euclid_nodes(t, h);
        let consumption = [t.service + cost, h.demand];
        if t.window_lo[R_TIME] + consumption[R_TIME] > h.window_hi[R_TIME] {
            return Ok(());
        }
        if t.demand + h.demand > q {
            return Ok(());
        }
        if matches!(t.kind, NodeKind::Customer) && matches!(h.kind, NodeKind::Customer) {
            if consumption[R_TIME] <= 0.0 {
                return Err(NetError::ZeroTimeArc {
                    tail,
                    head,
                    consumption: consumption[R_TIME],
                });
            }
        }
        let covered_row = matches!(h.kind, NodeKind::Customer).then(|| head - 1);
        arcs.push(ArcData {
            id: arcs.len(),
            tail,
            head,
            cost,
            consumption,
            covered_row,
        });
        Ok(())
    };

    for i in 1..=n {
        push(&mut arcs, 0, i)?;
    }
    for i in 1..=n {
        for j in 1..=n {
            if i != j {
                push(&mut arcs, i, j)?;
            }
        }
    }
    for i in 1..=n {
        push(&mut arcs, i, n + 1)?;
    }

    let parent_arc_ids = (0..arcs.len()).collect();
    Ok(assemble(nodes, arcs, q, false, parent_arc_ids))
}

fn assemble(
    nodes: Vec<NodeData>,
    arcs: Vec<ArcData>,
    capacity: f64,
    is_reduced: bool,
    parent_arc_ids: Vec<usize>,
) -> Network {
    let mut out_arcs = vec![Vec::new(); nodes.len()];
    let mut in_arcs = vec![Vec::new(); nodes.len()];
    for a in &arcs {
        out_arcs[a.tail].push(a.id);
        in_arcs[a.head].push(a.id);
    }
    Network {
        nodes,
        arcs,
        out_arcs,
        in_arcs,
        capacity,
        is_reduced,
        parent_arc_ids,
    }
}

/// Restricts a network to the arcs with `keep[arc.id]` set, plus every
/// depot-incident arc, which is always retained. Arc ids are renumbered
/// densely in the input's order; `parent_arc_ids` maps them back.
pub fn reduce_network(net: &Network, keep: &[bool]) -> Network {
    assert_eq!(keep.len(), net.arcs.len(), "keep mask length != arc count");
    let mut arcs = Vec::new();
    let mut parent = Vec::new();
    for a in &net.arcs {
        if keep[a.id] || !net.is_selectable(a.id) {
            let mut copy = a.clone();
            copy.id = arcs.len();
            parent.push(a.id);
            arcs.push(copy);
        }
    }
    assemble(net.nodes.clone(), arcs, net.capacity, true, parent)
}

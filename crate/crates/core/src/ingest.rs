//! Solomon-format instance I/O, window tightening, and seeded synthetic
//! instance generation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_for;

/// One customer row.
#[derive(Debug, Clone, PartialEq)]
pub struct Customer {
    /// 1-based id, matching the file's CUST NO. column.
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub demand: f64,
    pub ready: f64,
    pub due: f64,
    pub service: f64,
}

/// Depot coordinates and operating window (row 0 of the customer table).
#[derive(Debug, Clone, PartialEq)]
pub struct Depot {
    pub x: f64,
    pub y: f64,
    pub ready: f64,
    pub due: f64,
}

/// A parsed VRPTW instance.
#[derive(Debug, Clone, PartialEq)]
pub struct VrptwInstance {
    pub name: String,
    pub vehicle_capacity: f64,
    pub depot: Depot,
    pub customers: Vec<Customer>,
}

impl VrptwInstance {
    pub fn n_customers(&self) -> usize {
        self.customers.len()
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("missing section: {0}")]
    MissingSection(&'static str),
    #[error("instance has no customers")]
    NoCustomers,
    #[error("line {line}: customer {id}: {msg}")]
    BadCustomer { line: usize, id: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum TightenError {
    #[error("factor must lie in (0, 1], got {0}")]
    BadFactor(f64),
    #[error("customer {id}: window [{lo}, {hi}] leaves no feasible single-customer route")]
    InfeasibleWindow { id: usize, lo: f64, hi: f64 },
}

fn malformed(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        msg: msg.into(),
    }
}

/// Parses a Solomon-format instance: a name line, a VEHICLE section with a
/// NUMBER/CAPACITY row, and a CUSTOMER table whose row 0 is the depot.
pub fn parse_instance(text: &str) -> Result<VrptwInstance, ParseError> {
    // (1-based line number, trimmed content) for every non-blank line.
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(ParseError::MissingSection("name"));
    }
    let name = lines[0].1.to_string();

    let vehicle_at = lines
        .iter()
        .position(|(_, l)| l.eq_ignore_ascii_case("VEHICLE"))
        .ok_or(ParseError::MissingSection("VEHICLE"))?;
    // VEHICLE is followed by a column-header row, then the numbers row.
    let (vline, vrow) = *lines
        .get(vehicle_at + 2)
        .ok_or(ParseError::MissingSection("VEHICLE capacity row"))?;
    let vfields = parse_numbers(vrow).map_err(|msg| malformed(vline, msg))?;
    if vfields.len() != 2 {
        return Err(malformed(vline, "expected two fields: NUMBER CAPACITY"));
    }
    let vehicle_capacity = vfields[1];
    if !(vehicle_capacity > 0.0) {
        return Err(malformed(vline, "vehicle capacity must be positive"));
    }

    let customer_at = lines
        .iter()
        .position(|(_, l)| l.eq_ignore_ascii_case("CUSTOMER"))
        .ok_or(ParseError::MissingSection("CUSTOMER"))?;
    let mut depot: Option<Depot> = None;
    let mut customers = Vec::new();
    // Skip the CUSTOMER keyword and its column-header row.
    for &(lineno, row) in &lines[customer_at + 2..] {
        let fields = parse_numbers(row).map_err(|msg| malformed(lineno, msg))?;
        if fields.len() != 7 {
            return Err(malformed(
                lineno,
                format!("expected 7 customer fields, found {}", fields.len()),
            ));
        }
        let id = fields[0] as usize;
        if fields[0].fract() != 0.0 {
            return Err(malformed(lineno, "customer id must be an integer"));
        }
        if id == 0 {
            if depot.is_some() {
                return Err(malformed(lineno, "duplicate depot row"));
            }
            depot = Some(Depot {
                x: fields[1],
                y: fields[2],
                ready: fields[4],
                due: fields[5],
            });
        } else {
            if id != customers.len() + 1 {
                return Err(malformed(
                    lineno,
                    format!("customer ids must be consecutive, expected {}", customers.len() + 1),
                ));
            }
            let c = Customer {
                id,
                x: fields[1],
                y: fields[2],
                demand: fields[3],
                ready: fields[4],
                due: fields[5],
                service: fields[6],
            };
            if c.demand < 0.0 {
                return Err(ParseError::BadCustomer {
                    line: lineno,
                    id,
                    msg: "negative demand".into(),
                });
            }
            if c.service < 0.0 {
                return Err(ParseError::BadCustomer {
                    line: lineno,
                    id,
                    msg: "negative service time".into(),
                });
            }
            if c.due < c.ready {
                return Err(ParseError::BadCustomer {
                    line: lineno,
                    id,
                    msg: format!("window closes before it opens: [{}, {}]", c.ready, c.due),
                });
            }
            customers.push(c);
        }
    }
    let depot = depot.ok_or(ParseError::MissingSection("depot row (CUST NO. 0)"))?;
    if depot.due < depot.ready {
        return Err(ParseError::MissingSection("depot window is empty"));
    }
    if customers.is_empty() {
        return Err(ParseError::NoCustomers);
    }
    Ok(VrptwInstance {
        name,
        vehicle_capacity,
        depot,
        customers,
    })
}

fn parse_numbers(row: &str) -> Result<Vec<f64>, String> {
    row.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| format!("not a number: {tok:?}"))
        })
        .collect()
}

/// Renders an instance in the same Solomon layout that [`parse_instance`]
/// reads. Numbers use the shortest representation that round-trips, so
/// `parse(write(x)) == x`.
pub fn write_instance(inst: &VrptwInstance) -> String {
    let mut s = String::new();
    s.push_str(&inst.name);
    s.push_str("\n\nVEHICLE\nNUMBER     CAPACITY\n");
    s.push_str(&format!("  {:<9}{}\n", inst.customers.len(), fmt_num(inst.vehicle_capacity)));
    s.push_str("\nCUSTOMER\n");
    s.push_str(
        "CUST NO.  XCOORD.    YCOORD.    DEMAND   READY TIME   DUE DATE   SERVICE TIME\n\n",
    );
    let row = |id: usize, x: f64, y: f64, d: f64, r: f64, due: f64, sv: f64| {
        format!(
            "{:>5} {:>10} {:>10} {:>9} {:>12} {:>10} {:>14}\n",
            id,
            fmt_num(x),
            fmt_num(y),
            fmt_num(d),
            fmt_num(r),
            fmt_num(due),
            fmt_num(sv)
        )
    };
    s.push_str(&row(0, inst.depot.x, inst.depot.y, 0.0, inst.depot.ready, inst.depot.due, 0.0));
    for c in &inst.customers {
        s.push_str(&row(c.id, c.x, c.y, c.demand, c.ready, c.due, c.service));
    }
    s
}

fn fmt_num(v: f64) -> String {
    // Shortest round-trip form; integral values print without a fraction.
    format!("{v}")
}

/// Shrinks every customer window around its center: `[a, b]` becomes
/// `[c - f*w/2, c + f*w/2]` with `c = (a+b)/2`, `w = b-a`. The depot window
/// is left untouched. Fails if any tightened window no longer admits the
/// single-customer route depot -> customer -> depot.
pub fn tighten_windows(inst: &VrptwInstance, factor: f64) -> Result<VrptwInstance, TightenError> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(TightenError::BadFactor(factor));
    }
    let mut out = inst.clone();
    for c in &mut out.customers {
        let center = 0.5 * (c.ready + c.due);
        let half = 0.5 * factor * (c.due - c.ready);
        c.ready = center - half;
        c.due = center + half;
    }
    for c in &out.customers {
        if !singleton_feasible(&out, c) {
            return Err(TightenError::InfeasibleWindow {
                id: c.id,
                lo: c.ready,
                hi: c.due,
            });
        }
    }
    Ok(out)
}

/// True when depot -> customer -> depot respects the customer's window, the
/// depot's closing time, and the vehicle capacity.
pub fn singleton_feasible(inst: &VrptwInstance, c: &Customer) -> bool {
    let d = euclid(inst.depot.x, inst.depot.y, c.x, c.y);
    let arrive = (inst.depot.ready + d).max(c.ready);
    if arrive > c.due {
        return false;
    }
    let back = (arrive + c.service + d).max(inst.depot.ready);
    back <= inst.depot.due && c.demand <= inst.vehicle_capacity
}

pub fn euclid(x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let dx = x1 - x0;
    let dy = y1 - y0;
    (dx * dx + dy * dy).sqrt()
}

/// Spatial pattern for generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Coordinates uniform over the square.
    Random,
    /// Customers grouped around a few cluster centers.
    Clustered,
    /// Half random, half clustered.
    Mixed,
}

impl std::str::FromStr for Layout {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Layout::Random),
            "clustered" => Ok(Layout::Clustered),
            "mixed" => Ok(Layout::Mixed),
            other => Err(format!("unknown layout {other:?} (random|clustered|mixed)")),
        }
    }
}

/// Knobs for [`generate_random`]. Defaults give a long-horizon instance with
/// wide-but-varied windows, loose enough that window tightening at any factor
/// in (0, 1] keeps every single-customer route feasible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenParams {
    pub capacity: f64,
    /// Coordinates are drawn from [0, span] x [0, span]; depot at the center.
    pub span: f64,
    pub demand_min: u32,
    pub demand_max: u32,
    pub window_min: u32,
    pub window_max: u32,
    pub service: u32,
    pub horizon: u32,
    pub layout: Layout,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            capacity: 200.0,
            span: 100.0,
            demand_min: 5,
            demand_max: 40,
            window_min: 60,
            window_max: 220,
            service: 10,
            horizon: 1000,
            layout: Layout::Random,
        }
    }
}

/// Generates a seeded instance with integer coordinates, demands, service
/// times, and windows. Every customer admits its single-customer route, with
/// enough slack that the window center stays reachable, so tightening at any
/// factor in (0, 1] preserves that guarantee.
pub fn generate_random(n_customers: usize, seed: u64, params: &GenParams) -> VrptwInstance {
    assert!(n_customers >= 1, "need at least one customer");
    let p = params;
    let mut rng = rng_for(seed, "instance", n_customers as u64);
    let depot = Depot {
        x: (p.span / 2.0).round(),
        y: (p.span / 2.0).round(),
        ready: 0.0,
        due: f64::from(p.horizon),
    };
    let span = p.span.round() as u32;

    let n_clustered = match p.layout {
        Layout::Random => 0,
        Layout::Clustered => n_customers,
        Layout::Mixed => n_customers / 2,
    };
    let n_centers = (n_clustered / 6).max(2);
    let centers: Vec<(u32, u32)> = (0..n_centers)
        .map(|_| {
            let lo = span / 10;
            let hi = span - span / 10;
            (rng.gen_range(lo..=hi), rng.gen_range(lo..=hi))
        })
        .collect();

    let mut customers = Vec::with_capacity(n_customers);
    for i in 0..n_customers {
        let (x, y) = if i < n_clustered {
            let (cx, cy) = centers[rng.gen_range(0..centers.len())];
            let jitter = (span / 12).max(2) as i64;
            let x = (i64::from(cx) + rng.gen_range(-jitter..=jitter)).clamp(0, i64::from(span));
            let y = (i64::from(cy) + rng.gen_range(-jitter..=jitter)).clamp(0, i64::from(span));
            (x as u32, y as u32)
        } else {
            (rng.gen_range(0..=span), rng.gen_range(0..=span))
        };
        let demand = rng.gen_range(p.demand_min..=p.demand_max);
        let width = rng.gen_range(p.window_min..=p.window_max);
        let dist = euclid(depot.x, depot.y, f64::from(x), f64::from(y));
        // Keep the window wide open at both ends: the earliest start must let
        // the window CENTER cover the depot departure (so tightening cannot
        // strand the customer), and the latest start must leave time to
        // serve and return.
        let lo = (depot.ready + dist - f64::from(width) / 4.0).ceil().max(0.0) as u32;
        let hi_f = depot.due - f64::from(width) - f64::from(p.service) - dist;
        let hi = hi_f.floor() as i64;
        assert!(
            i64::from(lo) <= hi,
            "horizon {} too short for span {} and window width {}",
            p.horizon,
            p.span,
            width
        );
        let ready = rng.gen_range(lo..=hi as u32);
        customers.push(Customer {
            id: i + 1,
            x: f64::from(x),
            y: f64::from(y),
            demand: f64::from(demand),
            ready: f64::from(ready),
            due: f64::from(ready + width),
            service: f64::from(p.service),
        });
    }
    VrptwInstance {
        name: format!("gen-n{n_customers}-s{seed}"),
        vehicle_capacity: p.capacity,
        depot,
        customers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
toy5

VEHICLE
NUMBER     CAPACITY
  5          100

CUSTOMER
CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME   DUE DATE   SERVICE TIME

    0        50         50         0          0         500             0
    1        60         55        10         50         400            10
    2        40         45        15          0         450            10
";

    #[test]
    fn parses_the_sample() {
        let inst = parse_instance(SAMPLE).unwrap();
        assert_eq!(inst.name, "toy5");
        assert_eq!(inst.vehicle_capacity, 100.0);
        assert_eq!(inst.depot.x, 50.0);
        assert_eq!(inst.depot.due, 500.0);
        assert_eq!(inst.customers.len(), 2);
        assert_eq!(inst.customers[1].demand, 15.0);
        assert_eq!(inst.customers[0].service, 10.0);
    }

    #[test]
    fn write_then_parse_round_trips() {
        let inst = parse_instance(SAMPLE).unwrap();
        let text = write_instance(&inst);
        let again = parse_instance(&text).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn fractional_values_round_trip() {
        let mut inst = parse_instance(SAMPLE).unwrap();
        inst.customers[0].ready = 51.25;
        inst.customers[0].due = 398.7512345;
        let again = parse_instance(&write_instance(&inst)).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn reports_line_numbers_on_bad_rows() {
        let broken = SAMPLE.replace("    1        60", "    1        6x");
        let err = parse_instance(&broken).unwrap_err();
        match err {
            ParseError::Malformed { line, .. } => assert_eq!(line, 11),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_inverted_window() {
        let broken = SAMPLE.replace(
            "    1        60         55        10         50         400            10",
            "    1        60         55        10        450         400            10",
        );
        let err = parse_instance(&broken).unwrap_err();
        assert!(matches!(err, ParseError::BadCustomer { id: 1, .. }), "{err:?}");
    }

    #[test]
    fn rejects_gapped_customer_ids() {
        let broken = SAMPLE.replace("    2        40", "    3        40");
        assert!(parse_instance(&broken).is_err());
    }

    #[test]
    fn tighten_halves_widths_around_centers() {
        let inst = parse_instance(SAMPLE).unwrap();
        let t = tighten_windows(&inst, 0.5).unwrap();
        let c = &t.customers[0];
        assert_eq!(c.ready, 137.5);
        assert_eq!(c.due, 312.5);
        assert_eq!(t.depot.ready, inst.depot.ready);
        assert_eq!(t.depot.due, inst.depot.due);
    }

    #[test]
    fn tighten_rejects_bad_factor() {
        let inst = parse_instance(SAMPLE).unwrap();
        assert!(matches!(tighten_windows(&inst, 0.0), Err(TightenError::BadFactor(_))));
        assert!(matches!(tighten_windows(&inst, 1.5), Err(TightenError::BadFactor(_))));
    }

    #[test]
    fn tighten_detects_stranded_customer() {
        let mut inst = parse_instance(SAMPLE).unwrap();
        // A window whose center is unreachable from the depot: distance is
        // about 11.18, so after tightening to [9, 11] the customer is lost.
        inst.customers[0].ready = 0.0;
        inst.customers[0].due = 20.0;
        let err = tighten_windows(&inst, 0.1).unwrap_err();
        assert!(matches!(err, TightenError::InfeasibleWindow { id: 1, .. }), "{err:?}");
    }

    #[test]
    fn generated_instances_are_deterministic_and_feasible() {
        let p = GenParams::default();
        let a = generate_random(12, 42, &p);
        let b = generate_random(12, 42, &p);
        assert_eq!(a, b);
        let c = generate_random(12, 43, &p);
        assert_ne!(a, c);
        for cust in &a.customers {
            assert!(singleton_feasible(&a, cust), "customer {} infeasible", cust.id);
        }
    }

    #[test]
    fn generated_instances_survive_any_tighten_factor() {
        let p = GenParams::default();
        for seed in 0..8 {
            let inst = generate_random(15, seed, &p);
            for factor in [0.1, 0.3, 0.5, 0.8, 1.0] {
                tighten_windows(&inst, factor).unwrap();
            }
        }
    }

    #[test]
    fn generated_instances_round_trip_through_solomon_text() {
        let inst = generate_random(10, 7, &GenParams::default());
        let again = parse_instance(&write_instance(&inst)).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn layouts_differ() {
        let mut p = GenParams::default();
        let a = generate_random(20, 5, &p);
        p.layout = Layout::Clustered;
        let b = generate_random(20, 5, &p);
        assert_ne!(a.customers, b.customers);
    }
}

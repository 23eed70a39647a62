//! Grid topology: intersections, directed links and their lanes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of travel along a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn right(self) -> Heading {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    pub fn opposite(self) -> Heading {
        self.right().right()
    }

    /// True for north/south travel, which is served by the NS phases.
    pub fn is_vertical(self) -> bool {
        matches!(self, Heading::North | Heading::South)
    }

    /// (dcol, drow) with row 0 at the north edge.
    fn delta(self) -> (i64, i64) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    /// Side of an intersection a vehicle travelling this way arrives from.
    pub fn origin_side(self) -> char {
        match self {
            Heading::North => 'S',
            Heading::East => 'W',
            Heading::South => 'N',
            Heading::West => 'E',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoadClass {
    /// Two-way, two-lane road.
    Minor,
    /// Two-way, four-lane road.
    Major,
    /// Two-way, six-lane road.
    Central,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTiming {
    pub min_green: f64,
    pub max_green: f64,
    pub yellow: f64,
}

impl Default for SignalTiming {
    fn default() -> Self {
        Self { min_green: 4.0, max_green: 120.0, yellow: 3.0 }
    }
}

/// Declarative description of a rectangular signalized grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub rows: usize,
    pub cols: usize,
    /// Meters, applies to every link.
    pub lane_length: f64,
    /// Meters per second.
    pub speed_limit: f64,
    /// Lanes per direction for each road class.
    pub lanes_per_approach: BTreeMap<RoadClass, usize>,
    /// Class of the east-west road running through each row.
    pub row_classes: Vec<RoadClass>,
    /// Class of the north-south road running through each column.
    pub col_classes: Vec<RoadClass>,
    #[serde(default)]
    pub signal: SignalTiming,
    /// Vehicles per hour per lane discharged under green.
    #[serde(default = "default_saturation_flow")]
    pub saturation_flow: f64,
    /// Meters of lane taken by one stopped vehicle.
    #[serde(default = "default_jam_spacing")]
    pub jam_spacing: f64,
    /// Simulation step in seconds.
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_saturation_flow() -> f64 {
    1800.0
}

fn default_jam_spacing() -> f64 {
    7.5
}

fn default_dt() -> f64 {
    1.0
}

fn standard_lanes() -> BTreeMap<RoadClass, usize> {
    BTreeMap::from([(RoadClass::Minor, 1), (RoadClass::Major, 2), (RoadClass::Central, 3)])
}

impl NetworkSpec {
    /// Uniform grid of minor roads.
    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            lane_length: 100.0,
            speed_limit: 13.89,
            lanes_per_approach: standard_lanes(),
            row_classes: vec![RoadClass::Minor; rows],
            col_classes: vec![RoadClass::Minor; cols],
            signal: SignalTiming::default(),
            saturation_flow: default_saturation_flow(),
            jam_spacing: default_jam_spacing(),
            dt: default_dt(),
        }
    }

    /// 3x3 grid whose middle row and column are four-lane major roads.
    pub fn grid3x3() -> Self {
        let mut spec = Self::uniform(3, 3);
        spec.row_classes[1] = RoadClass::Major;
        spec.col_classes[1] = RoadClass::Major;
        spec
    }

    /// 5x5 grid: six-lane central routes, four-lane neighbours, two-lane rim.
    pub fn grid5x5() -> Self {
        let mut spec = Self::uniform(5, 5);
        let classes = vec![
            RoadClass::Minor,
            RoadClass::Major,
            RoadClass::Central,
            RoadClass::Major,
            RoadClass::Minor,
        ];
        spec.row_classes = classes.clone();
        spec.col_classes = classes;
        spec
    }

    pub fn lanes_for(&self, class: RoadClass) -> usize {
        self.lanes_per_approach.get(&class).copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        if self.rows == 0 || self.cols == 0 {
            return bad(format!("grid must be at least 1x1, got {}x{}", self.rows, self.cols));
        }
        if !(self.lane_length > 0.0) || !(self.speed_limit > 0.0) {
            return bad("lane length and speed limit must be positive".into());
        }
        if self.row_classes.len() != self.rows || self.col_classes.len() != self.cols {
            return bad("road class layout does not match grid size".into());
        }
        for class in self.row_classes.iter().chain(&self.col_classes) {
            if self.lanes_for(*class) == 0 {
                return bad(format!("road class {class:?} has zero lanes"));
            }
        }
        let t = &self.signal;
        if !(t.min_green > 0.0) || t.min_green > t.max_green || !(t.yellow > 0.0) {
            return bad(format!("invalid signal timing {t:?}"));
        }
        if !(self.saturation_flow > 0.0) || !(self.jam_spacing > 0.0) || !(self.dt > 0.0) {
            return bad("saturation flow, jam spacing and dt must be positive".into());
        }
        if self.jam_spacing > self.lane_length {
            return bad("a lane must hold at least one vehicle".into());
        }
        Ok(())
    }
}

pub type LinkId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Node(usize),
    Boundary,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub id: LinkId,
    pub from: Endpoint,
    pub to: Endpoint,
    pub heading: Heading,
    pub lanes: usize,
    /// Index of this link's first lane in the flat lane array.
    pub first_lane: usize,
    pub length: f64,
}

impl Link {
    pub fn lane_ids(&self) -> std::ops::Range<usize> {
        self.first_lane..self.first_lane + self.lanes
    }

    pub fn is_entry(&self) -> bool {
        self.from == Endpoint::Boundary
    }

    pub fn is_exit(&self) -> bool {
        self.to == Endpoint::Boundary
    }
}

#[derive(Debug, Clone)]
pub struct Intersection {
    pub id: usize,
    pub col: usize,
    pub row: usize,
    /// Column letter followed by row number, e.g. `B1`.
    pub name: String,
    /// Inbound links, ordered by heading.
    pub inbound: Vec<LinkId>,
    /// Outbound link per heading (indexed as `Heading::ALL`).
    pub outbound: [Option<LinkId>; 4],
}

/// Immutable topology derived from a [`NetworkSpec`].
#[derive(Debug, Clone)]
pub struct Network {
    pub spec: NetworkSpec,
    pub intersections: Vec<Intersection>,
    pub links: Vec<Link>,
    pub lane_count: usize,
    /// Per lane: owning link.
    pub lane_link: Vec<LinkId>,
    /// Entry links, ordered by id.
    pub entries: Vec<LinkId>,
}

fn heading_index(h: Heading) -> usize {
    Heading::ALL.iter().position(|x| *x == h).unwrap()
}

pub fn column_name(col: usize) -> String {
    let mut n = col;
    let mut out = Vec::new();
    loop {
        out.push((b'A' + (n % 26) as u8) as char);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    out.iter().rev().collect()
}

impl Network {
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let (rows, cols) = (spec.rows, spec.cols);
        let node = |c: usize, r: usize| r * cols + c;
        let mut intersections: Vec<Intersection> = (0..rows * cols)
            .map(|id| {
                let (col, row) = (id % cols, id / cols);
                Intersection {
                    id,
                    col,
                    row,
                    name: format!("{}{}", column_name(col), row),
                    inbound: Vec::new(),
                    outbound: [None; 4],
                }
            })
            .collect();

        let mut links = Vec::new();
        let mut lane_link = Vec::new();
        let mut push_link = |from: Endpoint, to: Endpoint, heading: Heading, lanes: usize| {
            let id = links.len();
            let first_lane = lane_link.len();
            lane_link.extend(std::iter::repeat_n(id, lanes));
            links.push(Link { id, from, to, heading, lanes, first_lane, length: spec.lane_length });
            id
        };

        let neighbour = |c: usize, r: usize, h: Heading| -> Option<usize> {
            let (dc, dr) = h.delta();
            let (nc, nr) = (c as i64 + dc, r as i64 + dr);
            (nc >= 0 && nr >= 0 && (nc as usize) < cols && (nr as usize) < rows)
                .then(|| node(nc as usize, nr as usize))
        };

        // Outgoing links (internal or exit) and entry links, intersection by intersection.
        for r in 0..rows {
            for c in 0..cols {
                let id = node(c, r);
                for h in Heading::ALL {
                    let lanes = if h.is_vertical() {
                        spec.lanes_for(spec.col_classes[c])
                    } else {
                        spec.lanes_for(spec.row_classes[r])
                    };
                    let to = neighbour(c, r, h).map_or(Endpoint::Boundary, Endpoint::Node);
                    let link = push_link(Endpoint::Node(id), to, h, lanes);
                    intersections[id].outbound[heading_index(h)] = Some(link);
                    // A vehicle heading `h` enters from the opposite side; if there is
                    // no neighbour there, that side is a network entrance.
                    if neighbour(c, r, h.opposite()).is_none() {
                        push_link(Endpoint::Boundary, Endpoint::Node(id), h, lanes);
                    }
                }
            }
        }

        for link in &links {
            if let Endpoint::Node(n) = link.to {
                intersections[n].inbound.push(link.id);
            }
        }
        for inter in &mut intersections {
            inter.inbound.sort_by_key(|l| (heading_index(links[*l].heading), *l));
        }
        let entries = links.iter().filter(|l| l.is_entry()).map(|l| l.id).collect();
        let lane_count = lane_link.len();
        Ok(Self { spec: spec.clone(), intersections, links, lane_count, lane_link, entries })
    }

    pub fn outbound(&self, intersection: usize, heading: Heading) -> LinkId {
        self.intersections[intersection].outbound[heading_index(heading)]
            .expect("every intersection has an outbound link per heading")
    }

    /// Stable name of an entry link: `<intersection>-<side>`, e.g. `A0-N`.
    pub fn entry_name(&self, link: LinkId) -> String {
        let l = &self.links[link];
        let Endpoint::Node(n) = l.to else { unreachable!("entry links end at a node") };
        format!("{}-{}", self.intersections[n].name, l.heading.origin_side())
    }

    pub fn entry_by_name(&self, name: &str) -> Option<LinkId> {
        self.entries.iter().copied().find(|l| self.entry_name(*l) == name)
    }

    pub fn intersection_by_name(&self, name: &str) -> Option<usize> {
        self.intersections.iter().position(|i| i.name == name)
    }

    /// Lanes whose downstream end is controlled by `intersection`.
    pub fn controlled_lanes(&self, intersection: usize) -> impl Iterator<Item = usize> + '_ {
        self.intersections[intersection].inbound.iter().flat_map(|l| self.links[*l].lane_ids())
    }

    /// Vehicles a lane holds at jam spacing.
    pub fn lane_capacity(&self) -> usize {
        (self.spec.lane_length / self.spec.jam_spacing).floor() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid3x3_layout() {
        let net = Network::build(&NetworkSpec::grid3x3()).unwrap();
        assert_eq!(net.intersections.len(), 9);
        assert_eq!(net.entries.len(), 12);
        // middle row/col are major: two lanes per direction
        let center = net.intersection_by_name("B1").unwrap();
        for l in &net.intersections[center].inbound {
            assert_eq!(net.links[*l].lanes, 2);
        }
        let corner = net.intersection_by_name("A0").unwrap();
        for l in &net.intersections[corner].inbound {
            assert_eq!(net.links[*l].lanes, 1);
        }
        // A1 sits on the major east-west road and a minor north-south road
        let a1 = net.intersection_by_name("A1").unwrap();
        let lanes: Vec<_> = net.intersections[a1]
            .inbound
            .iter()
            .map(|l| (net.links[*l].heading, net.links[*l].lanes))
            .collect();
        assert!(lanes.contains(&(Heading::East, 2)));
        assert!(lanes.contains(&(Heading::South, 1)));
    }

    #[test]
    fn single_intersection_has_four_approaches() {
        let net = Network::build(&NetworkSpec::uniform(1, 1)).unwrap();
        assert_eq!(net.intersections.len(), 1);
        assert_eq!(net.intersections[0].inbound.len(), 4);
        assert_eq!(net.entries.len(), 4);
        assert_eq!(net.links.len(), 8);
    }

    #[test]
    fn grid5x5_central_routes_are_six_lane() {
        let net = Network::build(&NetworkSpec::grid5x5()).unwrap();
        assert_eq!(net.intersections.len(), 25);
        let c2 = net.intersection_by_name("C2").unwrap();
        for l in &net.intersections[c2].inbound {
            assert_eq!(net.links[*l].lanes, 3);
        }
        let a0 = net.intersection_by_name("A0").unwrap();
        for l in &net.intersections[a0].inbound {
            assert_eq!(net.links[*l].lanes, 1);
        }
    }

    #[test]
    fn zero_lane_class_is_rejected() {
        let mut spec = NetworkSpec::grid3x3();
        spec.lanes_per_approach.insert(RoadClass::Major, 0);
        assert!(matches!(Network::build(&spec), Err(Error::InvalidNetwork(_))));
    }

    #[test]
    fn entry_names_round_trip() {
        let net = Network::build(&NetworkSpec::grid3x3()).unwrap();
        for e in &net.entries {
            assert_eq!(net.entry_by_name(&net.entry_name(*e)), Some(*e));
        }
        assert!(net.entry_by_name("A0-N").is_some());
        assert!(net.entry_by_name("A0-W").is_some());
        assert!(net.entry_by_name("B1-N").is_none());
    }

    #[test]
    fn column_names() {
        assert_eq!(column_name(0), "A");
        assert_eq!(column_name(25), "Z");
        assert_eq!(column_name(26), "AA");
    }
}

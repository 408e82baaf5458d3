//! Skeletal graph construction: the BODY_25 skeleton, object connection
//! strategies, neighbor partitioning, and degree normalization of the
//! per-subset adjacency matrices.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gcn::Matrix;
use crate::pose_io::{NUM_JOINTS, OBJECT_NODE};

/// Default `alpha` added to every node degree before normalization.
pub const DEFAULT_ALPHA: f64 = 0.001;

const BODY25_EDGES: [(usize, usize); 24] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (1, 5),
    (5, 6),
    (6, 7),
    (1, 8),
    (8, 9),
    (9, 10),
    (10, 11),
    (8, 12),
    (12, 13),
    (13, 14),
    (0, 15),
    (15, 17),
    (0, 16),
    (16, 18),
    (14, 19),
    (19, 20),
    (14, 21),
    (11, 22),
    (22, 23),
    (11, 24),
];

/// Arm and leg joints linked to the object by the limbs strategy.
pub const LIMB_JOINTS: [usize; 12] = [2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14];
/// Wrist joints linked to the object by the hands strategy.
pub const HAND_JOINTS: [usize; 2] = [4, 7];

/// How the object node is wired to the skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConnectionStrategy {
    HumanOnly,
    Body,
    Limbs,
    Hands,
}

impl ConnectionStrategy {
    pub fn tag(self) -> u8 {
        match self {
            Self::HumanOnly => 0,
            Self::Body => 1,
            Self::Limbs => 2,
            Self::Hands => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        [Self::HumanOnly, Self::Body, Self::Limbs, Self::Hands].into_iter().find(|s| s.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::HumanOnly => "human",
            Self::Body => "body",
            Self::Limbs => "limbs",
            Self::Hands => "hands",
        }
    }

    pub fn num_nodes(self) -> usize {
        if self == Self::HumanOnly {
            NUM_JOINTS
        } else {
            NUM_JOINTS + 1
        }
    }
}

impl FromStr for ConnectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(Self::HumanOnly),
            "body" => Ok(Self::Body),
            "limbs" => Ok(Self::Limbs),
            "hands" => Ok(Self::Hands),
            _ => Err(Error::Config(format!("unknown connection strategy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionStrategy {
    UniLabel,
    Distance,
    SpatialConfig,
}

impl PartitionStrategy {
    pub fn num_subsets(self) -> usize {
        match self {
            Self::UniLabel => 1,
            Self::Distance => 2,
            Self::SpatialConfig => 3,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Self::UniLabel => 0,
            Self::Distance => 1,
            Self::SpatialConfig => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        [Self::UniLabel, Self::Distance, Self::SpatialConfig].into_iter().find(|s| s.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::UniLabel => "uni",
            Self::Distance => "distance",
            Self::SpatialConfig => "spatial",
        }
    }
}

impl FromStr for PartitionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uni" => Ok(Self::UniLabel),
            "distance" => Ok(Self::Distance),
            "spatial" => Ok(Self::SpatialConfig),
            _ => Err(Error::Config(format!("unknown partition strategy '{s}'"))),
        }
    }
}

/// Nodes and undirected spatial edges of one frame's graph. Temporal edges
/// link each node to itself in the next frame and are realized by the
/// temporal convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub num_nodes: usize,
    /// Skeleton edges.
    pub spatial_edges: Vec<(usize, usize)>,
    /// Edges added by the object connection strategy.
    pub object_edges: Vec<(usize, usize)>,
    pub strategy: ConnectionStrategy,
}

/// The 24 BODY_25 skeleton edges.
pub fn human_edges() -> Vec<(usize, usize)> {
    BODY25_EDGES.to_vec()
}

/// Edges between the object node and the joints selected by `strategy`.
pub fn object_edges(strategy: ConnectionStrategy) -> Result<Vec<(usize, usize)>> {
    let joints: Vec<usize> = match strategy {
        ConnectionStrategy::HumanOnly => return Err(Error::Strategy),
        ConnectionStrategy::Body => (0..NUM_JOINTS).collect(),
        ConnectionStrategy::Limbs => LIMB_JOINTS.to_vec(),
        ConnectionStrategy::Hands => HAND_JOINTS.to_vec(),
    };
    Ok(joints.into_iter().map(|j| (j, OBJECT_NODE)).collect())
}

impl GraphSpec {
    pub fn new(strategy: ConnectionStrategy) -> Self {
        let object_edges = match strategy {
            ConnectionStrategy::HumanOnly => Vec::new(),
            s => object_edges(s).expect("object strategy"),
        };
        Self { num_nodes: strategy.num_nodes(), spatial_edges: human_edges(), object_edges, strategy }
    }

    /// An arbitrary graph, used for small hand-built cases.
    pub fn custom(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(a, b) in &edges {
            if a >= num_nodes || b >= num_nodes || a == b {
                return Err(Error::ShapeMismatch(format!("invalid edge ({a}, {b}) for {num_nodes} nodes")));
            }
        }
        Ok(Self { num_nodes, spatial_edges: edges, object_edges: Vec::new(), strategy: ConnectionStrategy::HumanOnly })
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.spatial_edges.iter().chain(self.object_edges.iter()).copied()
    }

    /// Symmetric 0/1 adjacency of all spatial edges, no self-loops.
    pub fn binary_adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.num_nodes, self.num_nodes);
        for (i, j) in self.edges() {
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
        a
    }
}

/// Per-subset adjacency matrices. `alpha` is `None` before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedAdjacency {
    pub subsets: Vec<Matrix>,
    pub alpha: Option<f64>,
}

impl PartitionedAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.subsets.first().map_or(0, |m| m.rows())
    }

    pub fn num_subsets(&self) -> usize {
        self.subsets.len()
    }

    /// Sum of all subsets.
    pub fn total(&self) -> Matrix {
        let n = self.num_nodes();
        let mut out = Matrix::zeros(n, n);
        for m in &self.subsets {
            for (o, v) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
                *o += v;
            }
        }
        out
    }

    /// Row-major text dump with 9 significant digits per entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let n = self.num_nodes();
        let _ = writeln!(
            s,
            "# subsets={} nodes={} alpha={}",
            self.num_subsets(),
            n,
            self.alpha.map_or("none".to_string(), |a| format!("{a:.8e}"))
        );
        for (k, m) in self.subsets.iter().enumerate() {
            let _ = writeln!(s, "subset {k}");
            for i in 0..n {
                let row: Vec<String> = (0..n).map(|j| format!("{:.8e}", m.get(i, j))).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s
    }
}

/// Mean position of the available nodes.
pub fn gravity_center(positions: &[Option<(f64, f64)>]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = positions.iter().flatten().copied().collect();
    if pts.is_empty() {
        return Err(Error::DegeneratePose);
    }
    let k = pts.len() as f64;
    Ok((pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k))
}

/// Root / centripetal / centrifugal split around the gravity center of
/// `mean_pose`. Neighbor `j` of root `i` is centripetal when it is at least as
/// close to the center as `i`. Nodes without a position are placed at the
/// center.
pub fn partition_spatial_config(spec: &GraphSpec, mean_pose: &[Option<(f64, f64)>]) -> Result<PartitionedAdjacency> {
    if mean_pose.len() != spec.num_nodes {
        return Err(Error::ShapeMismatch(format!("mean pose has {} nodes, graph has {}", mean_pose.len(), spec.num_nodes)));
    }
    let g = gravity_center(mean_pose)?;
    let dist: Vec<f64> = mean_pose.iter().map(|p| p.map_or(0.0, |(x, y)| ((x - g.0).powi(2) + (y - g.1).powi(2)).sqrt())).collect();
    let n = spec.num_nodes;
    let root = Matrix::identity(n);
    let mut centripetal = Matrix::zeros(n, n);
    let mut centrifugal = Matrix::zeros(n, n);
    for (a, b) in spec.edges() {
        for (i, j) in [(a, b), (b, a)] {
            if dist[j] <= dist[i] {
                centripetal.set(i, j, 1.0);
            } else {
                centrifugal.set(i, j, 1.0);
            }
        }
    }
    Ok(PartitionedAdjacency { subsets: vec![root, centripetal, centrifugal], alpha: None })
}

/// Single subset holding every neighbor and the root: `A + I`.
pub fn partition_uni_label(spec: &GraphSpec) -> PartitionedAdjacency {
    let mut a = spec.binary_adjacency();
    for i in 0..spec.num_nodes {
        a.set(i, i, 1.0);
    }
    PartitionedAdjacency { subsets: vec![a], alpha: None }
}

/// Root and 1-distance neighbors as separate subsets.
pub fn partition_distance(spec: &GraphSpec) -> PartitionedAdjacency {
    PartitionedAdjacency { subsets: vec![Matrix::identity(spec.num_nodes), spec.binary_adjacency()], alpha: None }
}

pub fn partition(spec: &GraphSpec, strategy: PartitionStrategy, mean_pose: &[Option<(f64, f64)>]) -> Result<PartitionedAdjacency> {
    match strategy {
        PartitionStrategy::UniLabel => Ok(partition_uni_label(spec)),
        PartitionStrategy::Distance => Ok(partition_distance(spec)),
        PartitionStrategy::SpatialConfig => partition_spatial_config(spec, mean_pose),
    }
}

/// Replaces each subset `A` by `R^-1/2 A C^-1/2`, where `R` and `C` hold the
/// row and column degrees of `A` plus `alpha`. For a symmetric subset both
/// equal the node degree matrix. Zero degrees (possible only with
/// `alpha == 0`) leave their rows and columns zero.
pub fn normalize(adj: &PartitionedAdjacency, alpha: f64) -> Result<PartitionedAdjacency> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    let inv_sqrt = |d: f64| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 };
    let subsets = adj
        .subsets
        .iter()
        .map(|a| {
            let n = a.rows();
            let row: Vec<f64> = (0..n).map(|i| inv_sqrt((0..n).map(|k| a.get(i, k)).sum::<f64>() + alpha)).collect();
            let col: Vec<f64> = (0..n).map(|k| inv_sqrt((0..n).map(|i| a.get(i, k)).sum::<f64>() + alpha)).collect();
            let mut out = Matrix::zeros(n, n);
            for (i, &r) in row.iter().enumerate() {
                for (k, &c) in col.iter().enumerate() {
                    let v = a.get(i, k);
                    if v != 0.0 {
                        out.set(i, k, r * v * c);
                    }
                }
            }
            out
        })
        .collect();
    Ok(PartitionedAdjacency { subsets, alpha: Some(alpha) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn components(n: usize, edges: &[(usize, usize)]) -> usize {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for &(a, b) in edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        (0..n).filter(|&i| find(&mut parent, i) == i).count()
    }

    #[test]
    fn skeleton_edges() {
        let e = human_edges();
        assert_eq!(e.len(), 24);
        assert!(e.contains(&(1, 2)) && e.contains(&(2, 3)));
        assert_eq!(components(25, &e), 1);
        assert!(e.iter().all(|(a, b)| a != b && *a < 25 && *b < 25));
    }

    #[test]
    fn object_strategies() {
        assert_eq!(object_edges(ConnectionStrategy::Hands).unwrap(), vec![(4, 25), (7, 25)]);
        assert_eq!(object_edges(ConnectionStrategy::Limbs).unwrap().len(), 12);
        assert_eq!(object_edges(ConnectionStrategy::Body).unwrap().len(), 25);
        assert!(matches!(object_edges(ConnectionStrategy::HumanOnly), Err(Error::Strategy)));
    }

    #[test]
    fn strategies_differ_only_at_object_node() {
        let specs: Vec<GraphSpec> =
            [ConnectionStrategy::Body, ConnectionStrategy::Limbs, ConnectionStrategy::Hands].into_iter().map(GraphSpec::new).collect();
        for s in &specs {
            assert_eq!(s.num_nodes, 26);
            assert_eq!(s.spatial_edges, human_edges());
            assert!(s.object_edges.iter().all(|&(_, b)| b == OBJECT_NODE));
        }
        assert_eq!(GraphSpec::new(ConnectionStrategy::HumanOnly).num_nodes, 25);
    }

    #[test]
    fn chain_spatial_partition() {
        let spec = GraphSpec::custom(3, vec![(0, 1), (1, 2)]).unwrap();
        let pose = [Some((-1.0, 0.0)), Some((0.0, 0.0)), Some((1.0, 0.0))];
        let p = partition_spatial_config(&spec, &pose).unwrap();
        assert_eq!(p.subsets[0], Matrix::identity(3));
        assert_eq!(p.subsets[1].get(0, 1), 1.0);
        assert_eq!(p.subsets[2].get(1, 0), 1.0);
        assert_eq!(p.subsets[2].get(1, 2), 1.0);
        assert_eq!(p.subsets[1].get(1, 0) + p.subsets[1].get(1, 2), 0.0);
    }

    #[test]
    fn coincident_nodes_are_all_centripetal() {
        let spec = GraphSpec::custom(3, vec![(0, 1), (1, 2)]).unwrap();
        let p = partition_spatial_config(&spec, &[Some((2.0, 2.0)); 3]).unwrap();
        assert_eq!(p.subsets[1], spec.binary_adjacency());
        assert_eq!(p.subsets[2], Matrix::zeros(3, 3));
        assert!(matches!(partition_spatial_config(&spec, &[None; 3]), Err(Error::DegeneratePose)));
    }

    #[test]
    fn partitions_sum_to_adjacency_plus_identity() {
        let spec = GraphSpec::new(ConnectionStrategy::Limbs);
        let pose: Vec<Option<(f64, f64)>> = (0..26).map(|i| Some(((i * 7 % 11) as f64, (i * 5 % 13) as f64))).collect();
        let mut expected = spec.binary_adjacency();
        for i in 0..26 {
            expected.set(i, i, 1.0);
        }
        for strat in [PartitionStrategy::UniLabel, PartitionStrategy::Distance, PartitionStrategy::SpatialConfig] {
            let p = partition(&spec, strat, &pose).unwrap();
            assert_eq!(p.num_subsets(), strat.num_subsets());
            assert_eq!(p.total(), expected, "{strat:?}");
        }
    }

    #[test]
    fn uni_label_and_distance_small_graphs() {
        let two = GraphSpec::custom(2, vec![(0, 1)]).unwrap();
        assert_eq!(partition_uni_label(&two).subsets[0].as_slice(), &[1.0, 1.0, 1.0, 1.0]);
        let empty = GraphSpec::custom(3, vec![]).unwrap();
        assert_eq!(partition_uni_label(&empty).subsets[0], Matrix::identity(3));
        assert_eq!(partition_distance(&empty).subsets[1], Matrix::zeros(3, 3));
        let path = GraphSpec::custom(3, vec![(0, 1), (1, 2)]).unwrap();
        let expected = [1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        assert_eq!(partition_uni_label(&path).subsets[0].as_slice(), &expected);
        let d = partition_distance(&path);
        assert_eq!(d.subsets[0], Matrix::identity(3));
        assert_eq!(d.subsets[1].as_slice(), &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn normalization_values() {
        let two = GraphSpec::custom(2, vec![(0, 1)]).unwrap();
        let n = normalize(&partition_uni_label(&two), DEFAULT_ALPHA).unwrap();
        for v in n.subsets[0].as_slice() {
            assert!((v - 1.0 / 2.001).abs() < 1e-15);
            assert!((v - 0.499750).abs() < 1e-6);
        }
        let zero = PartitionedAdjacency { subsets: vec![Matrix::zeros(3, 3)], alpha: None };
        assert_eq!(normalize(&zero, DEFAULT_ALPHA).unwrap().subsets[0], Matrix::zeros(3, 3));
        assert_eq!(normalize(&zero, 0.0).unwrap().subsets[0], Matrix::zeros(3, 3));
        assert!(normalize(&zero, -1.0).is_err());
    }

    #[test]
    fn normalization_preserves_symmetry() {
        let spec = GraphSpec::new(ConnectionStrategy::Body);
        let n = normalize(&partition_uni_label(&spec), DEFAULT_ALPHA).unwrap();
        let m = &n.subsets[0];
        for i in 0..26 {
            for j in 0..26 {
                assert_eq!(m.get(i, j), m.get(j, i));
                assert!(m.get(i, j).is_finite() && m.get(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn text_dump_has_nine_significant_digits() {
        let two = GraphSpec::custom(2, vec![(0, 1)]).unwrap();
        let n = normalize(&partition_uni_label(&two), DEFAULT_ALPHA).unwrap();
        let text = n.to_text();
        assert!(text.contains("4.99750125e-1"), "{text}");
        assert_eq!(text.lines().count(), 4);
    }
}

//! Synchronous Dataflow view of a mapped network partition.
//!
//! Stages fire at fixed token rates (tokens per cycle, as exact rationals);
//! the rate matrix admits a strictly positive balance vector exactly when the
//! steady-state flows of the pipeline are consistent. One token is one tensor
//! element, which keeps conservation exact for strided and padded windows.

use num_bigint::BigInt;
pub use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::design::{DesignError, DesignPoint};
use crate::ir::NetworkGraph;
use crate::perf::stage_cycles;

/// One pipeline stage: a layer under a folding config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdfStage {
    /// Index of the layer in the network chain.
    pub layer: usize,
    pub config: crate::design::StageConfig,
    /// Tokens consumed per network input (elements of the input tensor).
    pub tokens_in: u64,
    /// Tokens produced per network input (elements of the output tensor).
    pub tokens_out: u64,
    /// Active cycles per network input.
    pub cycles: u64,
}

/// A FIFO between two stages, carrying `tokens` per network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SdfArc {
    pub producer: usize,
    pub consumer: usize,
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdfGraph {
    pub stages: Vec<SdfStage>,
    pub arcs: Vec<SdfArc>,
}

impl SdfGraph {
    pub fn cycles(&self) -> Vec<u64> {
        self.stages.iter().map(|s| s.cycles).collect()
    }

    /// Rate matrix, one row per arc and one column per stage. The producer
    /// column holds `+tokens_out / cycles`, the consumer `-tokens_in / cycles`.
    pub fn rate_matrix(&self) -> Vec<Vec<BigRational>> {
        let n = self.stages.len();
        self.arcs
            .iter()
            .map(|arc| {
                let mut row = vec![BigRational::zero(); n];
                let p = &self.stages[arc.producer];
                let c = &self.stages[arc.consumer];
                row[arc.producer] = ratio(p.tokens_out, p.cycles);
                row[arc.consumer] -= ratio(c.tokens_in, c.cycles);
                row
            })
            .collect()
    }
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Builds the SDF graph of the design's active (first) partition.
pub fn build_sdf(network: &NetworkGraph, design: &DesignPoint) -> Result<SdfGraph, DesignError> {
    build_partition_sdf(network, design, 0)
}

/// Builds the SDF graph of one partition: a stage per layer, an arc between
/// each consecutive pair, cycles from the analytical stage model.
pub fn build_partition_sdf(
    network: &NetworkGraph,
    design: &DesignPoint,
    partition: usize,
) -> Result<SdfGraph, DesignError> {
    design.validate(network)?;
    let (start, end) = design.partitions[partition];
    let stages: Vec<SdfStage> = (start..end)
        .map(|i| SdfStage {
            layer: i,
            config: design.stage_configs[i],
            tokens_in: network.in_shape(i).elements(),
            tokens_out: network.out_shape(i).elements(),
            cycles: stage_cycles(
                &network.layers[i].kind,
                network.in_shape(i),
                network.out_shape(i),
                &design.stage_configs[i],
            ),
        })
        .collect();
    let arcs: Vec<SdfArc> = (1..stages.len())
        .map(|i| SdfArc {
            producer: i - 1,
            consumer: i,
            tokens: stages[i - 1].tokens_out,
        })
        .collect();
    Ok(SdfGraph { stages, arcs })
}

/// Outcome of the consistency analysis.
///
/// `balance_vector` is the strictly positive solution of `rate_matrix * t = 0`
/// pinned to the physical stage times (each connected component's first stage
/// is normalized to its cycle count, so `t_1 = cycles_1`). It is present only
/// for token-conserving graphs: a graph that loses or invents tokens on an arc
/// has no steady state at the physical rates, even if the matrix happens to
/// admit some other positive null vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub conserving: bool,
    pub balance_vector: Option<Vec<BigRational>>,
}

/// Token-conservation and balance-vector analysis by exact rational
/// Gaussian elimination on the rate matrix.
pub fn check_consistency(graph: &SdfGraph) -> ConsistencyReport {
    let conserving = graph.arcs.iter().all(|arc| {
        graph.stages[arc.producer].tokens_out == arc.tokens
            && graph.stages[arc.consumer].tokens_in == arc.tokens
    });

    let balance_vector = solve_balance(graph).filter(|_| conserving);
    ConsistencyReport {
        conserving,
        balance_vector,
    }
}

/// Steady-state initiation interval: the slowest stage paces the pipeline.
pub fn initiation_interval(graph: &SdfGraph) -> u64 {
    graph.stages.iter().map(|s| s.cycles).max().unwrap_or(0)
}

/// Solves `rate_matrix * t = 0` with each connected component's lowest-index
/// stage pinned to its cycle count. Returns the solution when the augmented
/// system is uniquely solvable and strictly positive.
fn solve_balance(graph: &SdfGraph) -> Option<Vec<BigRational>> {
    let n = graph.stages.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut rows = graph.rate_matrix();
    let mut rhs = vec![BigRational::zero(); rows.len()];

    // pinning rows: t[root] = cycles[root] for each connected component
    for root in component_roots(graph) {
        let mut row = vec![BigRational::zero(); n];
        row[root] = BigRational::one();
        rows.push(row);
        rhs.push(ratio(graph.stages[root].cycles, 1));
    }

    gaussian_solve(&mut rows, &mut rhs, n).filter(|t| t.iter().all(|v| v.is_positive()))
}

/// Lowest stage index of each connected component (arcs as undirected edges).
fn component_roots(graph: &SdfGraph) -> Vec<usize> {
    let n = graph.stages.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for arc in &graph.arcs {
        let a = find(&mut parent, arc.producer);
        let b = find(&mut parent, arc.consumer);
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut roots: Vec<usize> = (0..n).filter(|&i| find(&mut parent, i) == i).collect();
    roots.sort_unstable();
    roots
}

/// Exact Gauss-Jordan elimination of `rows * t = rhs` over the rationals.
/// Returns the unique solution, or `None` if the system is inconsistent or
/// underdetermined over the `n` unknowns.
fn gaussian_solve(
    rows: &mut [Vec<BigRational>],
    rhs: &mut [BigRational],
    n: usize,
) -> Option<Vec<BigRational>> {
    let m = rows.len();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; n];
    let mut pivot_row = 0usize;
    for col in 0..n {
        let Some(src) = (pivot_row..m).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(pivot_row, src);
        rhs.swap(pivot_row, src);
        let inv = rows[pivot_row][col].clone();
        for v in rows[pivot_row].iter_mut() {
            *v /= inv.clone();
        }
        rhs[pivot_row] /= inv;
        for r in 0..m {
            if r != pivot_row && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                let piv_row = rows[pivot_row].clone();
                for (v, p) in rows[r].iter_mut().zip(piv_row.iter()) {
                    *v -= &factor * p;
                }
                let piv_rhs = rhs[pivot_row].clone();
                rhs[r] -= factor * piv_rhs;
            }
        }
        pivot_of_col[col] = Some(pivot_row);
        pivot_row += 1;
        if pivot_row == m {
            break;
        }
    }
    // inconsistent: a zero row with non-zero right-hand side
    for r in pivot_row..m {
        if rows[r].iter().all(Zero::is_zero) && !rhs[r].is_zero() {
            return None;
        }
    }
    // underdetermined: some unknown has no pivot
    let mut solution = Vec::with_capacity(n);
    for pivot in pivot_of_col {
        solution.push(rhs[pivot?].clone());
    }
    Some(solution)
}

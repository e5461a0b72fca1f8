//! Exact solver for the discrete transportation problem, with an optional
//! sparsity mask restricting which cells may carry mass.
//!
//! The solver is a transportation simplex (MODI / u-v method) over a spanning
//! forest basis with Bland's anti-cycling rule, so it returns exact vertex
//! optima deterministically:
//!
//! * unmasked problems start from the north-west-corner basis;
//! * masked problems are first checked for feasibility with a bipartite
//!   max-flow (Edmonds-Karp); the max-flow plan is reduced to an acyclic
//!   support by cycle canceling and completed to a maximal spanning forest of
//!   the allowed cells, which then seeds the same simplex;
//! * after optimality the flows are re-derived from the final basis by leaf
//!   elimination, removing any drift accumulated across pivots.
//!
//! Entering variables take the first (row-major) cell with negative reduced
//! cost and leaving variables the lowest-index cell among ties, so plans are
//! reproducible and cycling is impossible.

use crate::error::{Error, Result};

/// Relative tolerance for marginal-sum agreement.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Entries of a returned plan are clamped to zero above this.
pub const PLAN_CLAMP: f64 = -1e-12;

/// Nonnegative cost matrix; `+inf` marks cells that must not carry mass.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "cost matrix storage",
                left: rows * cols,
                right: entries.len(),
            });
        }
        if let Some(&bad) = entries
            .iter()
            .find(|&&c| c.is_nan() || (c.is_finite() && c < 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "cost entries must be nonnegative or +inf, got {bad}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self::new(rows, cols, entries)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Boolean mask over plan cells; `false` forces the cell to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    allowed: Vec<bool>,
}

impl Mask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            allowed: vec![true; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut allowed = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                allowed.push(f(i, j));
            }
        }
        Self {
            rows,
            cols,
            allowed,
        }
    }

    #[inline]
    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.cols + j]
    }
}

/// Transport plan with its prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl Coupling {
    pub fn new(
        rows: usize,
        cols: usize,
        mut entries: Vec<f64>,
        row_marginal: Vec<f64>,
        col_marginal: Vec<f64>,
    ) -> Result<Self> {
        if entries.len() != rows * cols || row_marginal.len() != rows || col_marginal.len() != cols
        {
            return Err(Error::DimensionMismatch {
                context: "coupling storage",
                left: rows * cols,
                right: entries.len(),
            });
        }
        for x in entries.iter_mut() {
            if *x < 0.0 {
                if *x < PLAN_CLAMP {
                    return Err(Error::InvalidParameter(format!(
                        "coupling entry {x} below clamp tolerance"
                    )));
                }
                *x = 0.0;
            }
        }
        let c = Self {
            rows,
            cols,
            entries,
            row_marginal,
            col_marginal,
        };
        c.validate()?;
        Ok(c)
    }

    /// Check the marginal invariants (row and column sums within tolerance).
    pub fn validate(&self) -> Result<()> {
        let scale = f64::max(
            1.0,
            self.row_marginal.iter().sum::<f64>().abs(),
        );
        for i in 0..self.rows {
            let sum: f64 = (0..self.cols).map(|j| self.get(i, j)).sum();
            if (sum - self.row_marginal[i]).abs() > MARGINAL_TOL * scale {
                return Err(Error::MarginalMismatch {
                    sum0: sum,
                    sum1: self.row_marginal[i],
                });
            }
        }
        for j in 0..self.cols {
            let sum: f64 = (0..self.rows).map(|i| self.get(i, j)).sum();
            if (sum - self.col_marginal[j]).abs() > MARGINAL_TOL * scale {
                return Err(Error::MarginalMismatch {
                    sum0: sum,
                    sum1: self.col_marginal[j],
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    /// Cells carrying strictly positive mass.
    pub fn support(&self) -> Vec<(usize, usize)> {
        (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j) > 0.0)
            .collect()
    }
}

/// Optimal value and plan of a transportation problem.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub value: f64,
    pub plan: Coupling,
}

/// Distinguished outcome for problems whose feasible set may be empty.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Solved(T),
    Infeasible,
}

impl<T> LpOutcome<T> {
    pub fn solved(self) -> Option<T> {
        match self {
            LpOutcome::Solved(t) => Some(t),
            LpOutcome::Infeasible => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, LpOutcome::Infeasible)
    }

    pub fn expect_solved(self, msg: &str) -> T {
        match self {
            LpOutcome::Solved(t) => t,
            LpOutcome::Infeasible => panic!("{msg}"),
        }
    }
}

/// Exact optimum of the unmasked transportation problem.
pub fn solve_transport(cost: &CostMatrix, p0: &[f64], p1: &[f64]) -> Result<TransportSolution> {
    match solve_inner(cost, p0, p1, None)? {
        LpOutcome::Solved(s) => Ok(s),
        // With every cell allowed and matching totals the polytope always
        // contains the product coupling.
        LpOutcome::Infeasible => Err(Error::NumericalFailure(
            "unmasked transportation problem reported infeasible",
        )),
    }
}

/// Exact optimum over the masked polytope, or `Infeasible` when it is empty.
pub fn solve_transport_masked(
    cost: &CostMatrix,
    p0: &[f64],
    p1: &[f64],
    mask: &Mask,
) -> Result<LpOutcome<TransportSolution>> {
    if mask.rows != cost.rows() || mask.cols != cost.cols() {
        return Err(Error::DimensionMismatch {
            context: "mask vs cost matrix",
            left: mask.rows * mask.cols,
            right: cost.rows() * cost.cols(),
        });
    }
    solve_inner(cost, p0, p1, Some(mask))
}

/// Gluing composition of two plans through their shared middle marginal:
/// `pi02(i,k) = sum_j pi01(i,j) * pi12(j,k) / p1(j)`.
pub fn compose_plans(p01: &Coupling, p12: &Coupling) -> Result<Coupling> {
    if p01.cols != p12.rows {
        return Err(Error::DimensionMismatch {
            context: "plan composition middle marginal",
            left: p01.cols,
            right: p12.rows,
        });
    }
    let mid = &p01.col_marginal;
    let mut entries = vec![0.0; p01.rows * p12.cols];
    for j in 0..p01.cols {
        if mid[j] <= 0.0 {
            continue;
        }
        for i in 0..p01.rows {
            let w = p01.get(i, j);
            if w == 0.0 {
                continue;
            }
            for k in 0..p12.cols {
                entries[i * p12.cols + k] += w * p12.get(j, k) / mid[j];
            }
        }
    }
    Coupling::new(
        p01.rows,
        p12.cols,
        entries,
        p01.row_marginal.clone(),
        p12.col_marginal.clone(),
    )
}

// ---------------------------------------------------------------------------
// Solver internals
// ---------------------------------------------------------------------------

const MAX_PIVOTS: usize = 200_000;

fn validate_instance(cost: &CostMatrix, p0: &[f64], p1: &[f64]) -> Result<f64> {
    if cost.rows() != p0.len() || cost.cols() != p1.len() {
        return Err(Error::DimensionMismatch {
            context: "cost matrix vs marginals",
            left: cost.rows(),
            right: p0.len(),
        });
    }
    for (index, &w) in p0.iter().enumerate() {
        if w < 0.0 {
            return Err(Error::NegativeWeight { index, value: w });
        }
    }
    for (index, &w) in p1.iter().enumerate() {
        if w < 0.0 {
            return Err(Error::NegativeWeight { index, value: w });
        }
    }
    let sum0: f64 = p0.iter().sum();
    let sum1: f64 = p1.iter().sum();
    if (sum0 - sum1).abs() > MARGINAL_TOL * f64::max(1.0, sum0.max(sum1)) {
        return Err(Error::MarginalMismatch { sum0, sum1 });
    }
    Ok(sum0)
}

fn solve_inner(
    cost: &CostMatrix,
    p0: &[f64],
    p1: &[f64],
    mask: Option<&Mask>,
) -> Result<LpOutcome<TransportSolution>> {
    let total = validate_instance(cost, p0, p1)?;

    // Drop zero-weight rows/columns; they are reinserted as zeros at the end.
    let rows: Vec<usize> = (0..p0.len()).filter(|&i| p0[i] > 0.0).collect();
    let cols: Vec<usize> = (0..p1.len()).filter(|&j| p1[j] > 0.0).collect();

    let finish = |entries: Vec<f64>, value: f64| -> Result<TransportSolution> {
        let plan = Coupling::new(p0.len(), p1.len(), entries, p0.to_vec(), p1.to_vec())?;
        Ok(TransportSolution { value, plan })
    };

    if rows.is_empty() || cols.is_empty() {
        // Nothing to move (total mass within tolerance of zero).
        let entries = vec![0.0; p0.len() * p1.len()];
        return Ok(LpOutcome::Solved(finish(entries, 0.0)?));
    }

    let n0 = rows.len();
    let n1 = cols.len();
    let a: Vec<f64> = rows.iter().map(|&i| p0[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| p1[j]).collect();
    let allowed: Vec<bool> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| {
            mask.map_or(true, |m| m.allowed(i, j)) && cost.get(i, j).is_finite()
        })
        .collect();
    let c: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| cost.get(i, j)))
        .map(|x| if x.is_finite() { x } else { 0.0 })
        .collect();

    let mut simplex = Simplex::new(n0, n1, a, b, c, allowed);
    let initialized = if mask.is_some() {
        simplex.init_from_max_flow(total)?
    } else {
        simplex.init_north_west();
        true
    };
    if !initialized {
        return Ok(LpOutcome::Infeasible);
    }
    simplex.optimize()?;
    let reduced_plan = simplex.exact_flows()?;

    // Expand to the original index set and price with the original costs.
    let mut entries = vec![0.0; p0.len() * p1.len()];
    let mut value = 0.0;
    for (ri, &i) in rows.iter().enumerate() {
        for (rj, &j) in cols.iter().enumerate() {
            let f = reduced_plan[ri * n1 + rj];
            if f != 0.0 {
                entries[i * p1.len() + j] = f;
                value += cost.get(i, j) * f;
            }
        }
    }
    Ok(LpOutcome::Solved(finish(entries, value)?))
}

struct Simplex {
    n0: usize,
    n1: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
    allowed: Vec<bool>,
    in_basis: Vec<bool>,
    flow: Vec<f64>,
    /// Adjacency over nodes (rows then columns); values are cell ids.
    adj: Vec<Vec<usize>>,
    reduced_tol: f64,
}

impl Simplex {
    fn new(n0: usize, n1: usize, a: Vec<f64>, b: Vec<f64>, cost: Vec<f64>, allowed: Vec<bool>) -> Self {
        let max_cost = cost
            .iter()
            .zip(&allowed)
            .filter(|(_, &ok)| ok)
            .map(|(c, _)| c.abs())
            .fold(0.0, f64::max);
        Self {
            n0,
            n1,
            a,
            b,
            cost,
            allowed,
            in_basis: vec![false; n0 * n1],
            flow: vec![0.0; n0 * n1],
            adj: vec![Vec::new(); n0 + n1],
            reduced_tol: 1e-11 * (1.0 + max_cost),
        }
    }

    #[inline]
    fn cell(&self, i: usize, j: usize) -> usize {
        i * self.n1 + j
    }

    #[inline]
    fn cell_row(&self, cell: usize) -> usize {
        cell / self.n1
    }

    #[inline]
    fn cell_col(&self, cell: usize) -> usize {
        cell % self.n1
    }

    fn add_basis(&mut self, cell: usize) {
        debug_assert!(!self.in_basis[cell]);
        self.in_basis[cell] = true;
        let (i, j) = (self.cell_row(cell), self.cell_col(cell));
        self.adj[i].push(cell);
        self.adj[self.n0 + j].push(cell);
    }

    fn remove_basis(&mut self, cell: usize) {
        debug_assert!(self.in_basis[cell]);
        self.in_basis[cell] = false;
        let (i, j) = (self.cell_row(cell), self.cell_col(cell));
        self.adj[i].retain(|&e| e != cell);
        self.adj[self.n0 + j].retain(|&e| e != cell);
    }

    /// North-west-corner initial basis: a staircase spanning tree with
    /// exactly `n0 + n1 - 1` cells, degenerate zeros included.
    fn init_north_west(&mut self) {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        let mut i = 0;
        let mut j = 0;
        for _ in 0..(self.n0 + self.n1 - 1) {
            let cell = self.cell(i, j);
            self.add_basis(cell);
            let x = a[i].min(b[j]);
            self.flow[cell] = x;
            a[i] -= x;
            b[j] -= x;
            if i == self.n0 - 1 {
                j += 1;
            } else if j == self.n1 - 1 {
                i += 1;
            } else if a[i] <= 0.0 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    /// Feasibility check plus initial basis for masked problems. Returns
    /// `false` when the masked polytope is empty.
    fn init_from_max_flow(&mut self, total: f64) -> Result<bool> {
        let flow = self.bipartite_max_flow();
        let shipped: f64 = flow.iter().sum();
        if (total - shipped) > MARGINAL_TOL * f64::max(1.0, total) {
            return Ok(false);
        }
        self.flow = flow;
        self.cancel_support_cycles();
        self.complete_forest();
        Ok(true)
    }

    /// Edmonds-Karp on source -> rows -> columns -> sink. Row-column edges
    /// exist only for allowed cells. Returns the per-cell flow.
    fn bipartite_max_flow(&self) -> Vec<f64> {
        let n = self.n0 + self.n1 + 2;
        let source = self.n0 + self.n1;
        let sink = source + 1;
        let idx = |u: usize, v: usize| u * n + v;
        let mut residual = vec![0.0; n * n];
        for i in 0..self.n0 {
            residual[idx(source, i)] = self.a[i];
        }
        for j in 0..self.n1 {
            residual[idx(self.n0 + j, sink)] = self.b[j];
        }
        let inf = f64::INFINITY;
        for i in 0..self.n0 {
            for j in 0..self.n1 {
                if self.allowed[self.cell(i, j)] {
                    residual[idx(i, self.n0 + j)] = inf;
                }
            }
        }

        loop {
            // BFS for a shortest augmenting path.
            let mut parent = vec![usize::MAX; n];
            parent[source] = source;
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(source);
            while let Some(u) = queue.pop_front() {
                if u == sink {
                    break;
                }
                for v in 0..n {
                    if parent[v] == usize::MAX && residual[idx(u, v)] > 0.0 {
                        parent[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if parent[sink] == usize::MAX {
                break;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let u = parent[v];
                bottleneck = bottleneck.min(residual[idx(u, v)]);
                v = u;
            }
            if bottleneck <= 0.0 {
                break;
            }
            let mut v = sink;
            while v != source {
                let u = parent[v];
                residual[idx(u, v)] -= bottleneck;
                residual[idx(v, u)] += bottleneck;
                v = u;
            }
        }

        let mut flow = vec![0.0; self.n0 * self.n1];
        for i in 0..self.n0 {
            for j in 0..self.n1 {
                if self.allowed[self.cell(i, j)] {
                    // Forward capacity was infinite; the shipped amount sits
                    // on the reverse residual edge.
                    flow[self.cell(i, j)] = residual[idx(self.n0 + j, i)];
                }
            }
        }
        flow
    }

    /// Remove cycles from the positive-flow support by alternating pushes;
    /// each push zeroes at least one cell.
    fn cancel_support_cycles(&mut self) {
        loop {
            let Some(cycle) = self.find_support_cycle() else {
                return;
            };
            // Alternate signs along the cycle; nodes are shared by exactly
            // one '+' and one '-' cell, so marginals are preserved.
            let mut delta = f64::INFINITY;
            for (pos, &cell) in cycle.iter().enumerate() {
                if pos % 2 == 1 {
                    delta = delta.min(self.flow[cell]);
                }
            }
            for (pos, &cell) in cycle.iter().enumerate() {
                if pos % 2 == 1 {
                    let f = self.flow[cell] - delta;
                    self.flow[cell] = if f <= 0.0 { 0.0 } else { f };
                } else {
                    self.flow[cell] += delta;
                }
            }
        }
    }

    /// DFS for a cycle in the bipartite support graph; returns the cells of
    /// one cycle in traversal order, or `None` if the support is a forest.
    fn find_support_cycle(&self) -> Option<Vec<usize>> {
        let nodes = self.n0 + self.n1;
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        for cell in 0..self.flow.len() {
            if self.flow[cell] > 0.0 {
                let (i, j) = (self.cell_row(cell), self.cell_col(cell));
                adjacency[i].push(cell);
                adjacency[self.n0 + j].push(cell);
            }
        }
        let other_end = |cell: usize, node: usize| -> usize {
            let (i, j) = (self.cell_row(cell), self.cell_col(cell));
            if node == i {
                self.n0 + j
            } else {
                i
            }
        };

        let mut visited = vec![false; nodes];
        for start in 0..nodes {
            if visited[start] {
                continue;
            }
            // Iterative DFS storing the cell used to enter each node.
            let mut entry_cell = vec![usize::MAX; nodes];
            let mut parent = vec![usize::MAX; nodes];
            let mut stack = vec![start];
            visited[start] = true;
            while let Some(u) = stack.pop() {
                for &cell in &adjacency[u] {
                    if cell == entry_cell[u] {
                        continue;
                    }
                    let v = other_end(cell, u);
                    // Each cell is the unique edge between its endpoints, so
                    // matching entry cells identifies tree edges exactly.
                    if cell == entry_cell[v] {
                        continue;
                    }
                    if !visited[v] {
                        visited[v] = true;
                        entry_cell[v] = cell;
                        parent[v] = u;
                        stack.push(v);
                    } else {
                        // Found a cycle closing edge between u and v: walk
                        // both ancestries up to their meeting point.
                        return Some(self.extract_cycle(cell, u, v, &parent, &entry_cell));
                    }
                }
            }
        }
        None
    }

    fn extract_cycle(
        &self,
        closing_cell: usize,
        u: usize,
        v: usize,
        parent: &[usize],
        entry_cell: &[usize],
    ) -> Vec<usize> {
        let path_to_root = |mut node: usize| -> Vec<usize> {
            let mut nodes = vec![node];
            while parent[node] != usize::MAX {
                node = parent[node];
                nodes.push(node);
            }
            nodes
        };
        let pu = path_to_root(u);
        let pv = path_to_root(v);
        // Find the lowest common ancestor.
        let set: std::collections::HashSet<usize> = pu.iter().copied().collect();
        let lca = *pv.iter().find(|n| set.contains(n)).expect("common root");

        let mut cells = vec![closing_cell];
        // v .. lca
        let mut node = v;
        while node != lca {
            cells.push(entry_cell[node]);
            node = parent[node];
        }
        // lca .. u reversed
        let mut up = Vec::new();
        let mut node = u;
        while node != lca {
            up.push(entry_cell[node]);
            node = parent[node];
        }
        up.reverse();
        cells.extend(up);
        cells
    }

    /// Extend the acyclic support to a maximal spanning forest of the
    /// allowed cells, scanning lexicographically for determinism.
    fn complete_forest(&mut self) {
        let nodes = self.n0 + self.n1;
        let mut dsu: Vec<usize> = (0..nodes).collect();
        fn find(dsu: &mut Vec<usize>, x: usize) -> usize {
            if dsu[x] != x {
                let root = find(dsu, dsu[x]);
                dsu[x] = root;
            }
            dsu[x]
        }
        // Support cells first.
        for cell in 0..self.flow.len() {
            if self.flow[cell] > 0.0 {
                let (i, j) = (self.cell_row(cell), self.cell_col(cell));
                let (ri, rj) = (find(&mut dsu, i), find(&mut dsu, self.n0 + j));
                debug_assert_ne!(ri, rj, "support should be acyclic here");
                dsu[ri] = rj;
                self.add_basis(cell);
            }
        }
        // Zero-flow allowed cells to join remaining trees.
        for cell in 0..self.flow.len() {
            if self.in_basis[cell] || !self.allowed[cell] {
                continue;
            }
            let (i, j) = (self.cell_row(cell), self.cell_col(cell));
            let (ri, rj) = (find(&mut dsu, i), find(&mut dsu, self.n0 + j));
            if ri != rj {
                dsu[ri] = rj;
                self.add_basis(cell);
            }
        }
    }

    /// Dual potentials from the basis forest; one root per tree.
    fn duals(&self) -> (Vec<f64>, Vec<f64>) {
        let nodes = self.n0 + self.n1;
        let mut u = vec![0.0; self.n0];
        let mut v = vec![0.0; self.n1];
        let mut visited = vec![false; nodes];
        for root in 0..nodes {
            if visited[root] {
                continue;
            }
            visited[root] = true;
            let mut stack = vec![root];
            while let Some(node) = stack.pop() {
                for &cell in &self.adj[node] {
                    let (i, j) = (self.cell_row(cell), self.cell_col(cell));
                    let (row_node, col_node) = (i, self.n0 + j);
                    let next = if node == row_node { col_node } else { row_node };
                    if visited[next] {
                        continue;
                    }
                    visited[next] = true;
                    if next == col_node {
                        v[j] = self.cost[cell] - u[i];
                    } else {
                        u[i] = self.cost[cell] - v[j];
                    }
                    stack.push(next);
                }
            }
        }
        (u, v)
    }

    /// First allowed nonbasic cell with negative reduced cost (Bland).
    fn entering(&self, u: &[f64], v: &[f64]) -> Option<usize> {
        for cell in 0..self.cost.len() {
            if self.in_basis[cell] || !self.allowed[cell] {
                continue;
            }
            let (i, j) = (self.cell_row(cell), self.cell_col(cell));
            if self.cost[cell] - u[i] - v[j] < -self.reduced_tol {
                return Some(cell);
            }
        }
        None
    }

    /// Unique basis path between the entering cell's endpoints.
    fn basis_path(&self, from: usize, to: usize) -> Result<Vec<usize>> {
        let nodes = self.n0 + self.n1;
        let mut entry = vec![usize::MAX; nodes];
        let mut parent = vec![usize::MAX; nodes];
        let mut visited = vec![false; nodes];
        visited[from] = true;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(from);
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &cell in &self.adj[node] {
                let (i, j) = (self.cell_row(cell), self.cell_col(cell));
                let next = if node == i { self.n0 + j } else { i };
                if !visited[next] {
                    visited[next] = true;
                    entry[next] = cell;
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        if !visited[to] {
            return Err(Error::NumericalFailure(
                "transportation basis lost connectivity",
            ));
        }
        let mut cells = Vec::new();
        let mut node = to;
        while node != from {
            cells.push(entry[node]);
            node = parent[node];
        }
        cells.reverse();
        Ok(cells)
    }

    fn optimize(&mut self) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let (u, v) = self.duals();
            let Some(entering) = self.entering(&u, &v) else {
                return Ok(());
            };
            let (i, j) = (self.cell_row(entering), self.cell_col(entering));
            let path = self.basis_path(i, self.n0 + j)?;
            // Signs along the cycle: entering is '+', path cells alternate
            // starting with '-' (the first path cell shares row i).
            let mut delta = f64::INFINITY;
            let mut leaving = usize::MAX;
            for (pos, &cell) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    let f = self.flow[cell];
                    if f < delta || (f == delta && cell < leaving) {
                        delta = f;
                        leaving = cell;
                    }
                }
            }
            debug_assert!(leaving != usize::MAX);
            for (pos, &cell) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    self.flow[cell] -= delta;
                } else {
                    self.flow[cell] += delta;
                }
            }
            self.flow[leaving] = 0.0;
            self.flow[entering] = delta;
            self.remove_basis(leaving);
            self.add_basis(entering);
        }
        Err(Error::NumericalFailure(
            "transportation simplex exceeded the pivot cap",
        ))
    }

    /// Re-derive the basic solution exactly from the final basis by leaf
    /// elimination over the original marginals.
    fn exact_flows(&self) -> Result<Vec<f64>> {
        let nodes = self.n0 + self.n1;
        let mut rem: Vec<f64> = self.a.iter().chain(self.b.iter()).copied().collect();
        let mut degree = vec![0usize; nodes];
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        let mut basis_cells = Vec::new();
        for cell in 0..self.flow.len() {
            if self.in_basis[cell] {
                let (i, j) = (self.cell_row(cell), self.cell_col(cell));
                degree[i] += 1;
                degree[self.n0 + j] += 1;
                incident[i].push(cell);
                incident[self.n0 + j].push(cell);
                basis_cells.push(cell);
            }
        }
        let mut removed = vec![false; self.flow.len()];
        let mut flows = vec![0.0; self.flow.len()];
        let mut queue: Vec<usize> = (0..nodes).filter(|&n| degree[n] == 1).collect();
        let mut processed = 0;
        while let Some(node) = queue.pop() {
            if degree[node] != 1 {
                continue;
            }
            let Some(&cell) = incident[node].iter().find(|&&c| !removed[c]) else {
                continue;
            };
            let (i, j) = (self.cell_row(cell), self.cell_col(cell));
            let other = if node == i { self.n0 + j } else { i };
            let f = rem[node];
            if f < PLAN_CLAMP {
                return Err(Error::NumericalFailure(
                    "negative basic flow in optimal basis",
                ));
            }
            flows[cell] = f.max(0.0);
            rem[node] = 0.0;
            rem[other] -= f;
            degree[node] -= 1;
            degree[other] -= 1;
            removed[cell] = true;
            processed += 1;
            if degree[other] == 1 {
                queue.push(other);
            }
        }
        if processed != basis_cells.len() {
            return Err(Error::NumericalFailure("basis contains a cycle"));
        }
        let scale = f64::max(1.0, self.a.iter().sum::<f64>());
        if rem.iter().any(|r| r.abs() > MARGINAL_TOL * scale) {
            return Err(Error::NumericalFailure(
                "basis flows do not balance the marginals",
            ));
        }
        Ok(flows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{enumerate_transport_vertices, mask_feasible, EnumeratedOptimum};
    use crate::testkit::{random_simplex_weights, rng};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn forced_1x1() {
        let cost = CostMatrix::new(1, 1, vec![2.5]).unwrap();
        let sol = solve_transport(&cost, &[1.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(sol.value, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.plan.get(0, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_cost_diagonal_2x2() {
        let cost = CostMatrix::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let sol = solve_transport(&cost, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(sol.value, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.plan.get(0, 0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.plan.get(1, 1), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn analytic_2x2_vertex() {
        let cost = CostMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 1.0]).unwrap();
        let sol = solve_transport(&cost, &[0.6, 0.4], &[0.3, 0.7]).unwrap();
        assert_abs_diff_eq!(sol.value, 1.3, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.plan.get(0, 0), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.plan.get(0, 1), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.plan.get(1, 0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.plan.get(1, 1), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn full_mask_matches_unmasked() {
        let mut r = rng(31);
        for _ in 0..20 {
            let n0 = r.gen_range(1..=4);
            let n1 = r.gen_range(1..=4);
            let cost =
                CostMatrix::from_fn(n0, n1, |_, _| r.gen_range(0.0..5.0)).unwrap();
            let p0 = random_simplex_weights(&mut r, n0);
            let p1 = random_simplex_weights(&mut r, n1);
            let plain = solve_transport(&cost, &p0, &p1).unwrap();
            let masked = solve_transport_masked(&cost, &p0, &p1, &Mask::full(n0, n1))
                .unwrap()
                .expect_solved("full mask is feasible");
            assert_abs_diff_eq!(plain.value, masked.value, epsilon = 1e-10);
        }
    }

    #[test]
    fn chain_restriction_is_infeasible() {
        // All supply sits in the first channel, all demand in the third, and
        // the direct cell is forbidden.
        let cost = CostMatrix::new(1, 1, vec![9.0]).unwrap();
        let mask = Mask::from_fn(1, 1, |_, _| false);
        let out = solve_transport_masked(&cost, &[1.0], &[1.0], &mask).unwrap();
        assert!(out.is_infeasible());
    }

    #[test]
    fn diagonal_mask_forces_identity_plan() {
        let cost = CostMatrix::new(3, 3, vec![5.0; 9]).unwrap();
        let mask = Mask::from_fn(3, 3, |i, j| i == j);
        let p = [0.2, 0.5, 0.3];
        let sol = solve_transport_masked(&cost, &p, &p, &mask)
            .unwrap()
            .expect_solved("diagonal feasible");
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { p[i] } else { 0.0 };
                assert_abs_diff_eq!(sol.plan.get(i, j), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn infinite_cost_acts_as_mask() {
        let inf = f64::INFINITY;
        let cost = CostMatrix::new(2, 2, vec![0.0, inf, inf, 0.0]).unwrap();
        let mask = Mask::full(2, 2);
        let sol = solve_transport_masked(&cost, &[0.5, 0.5], &[0.5, 0.5], &mask)
            .unwrap()
            .expect_solved("diagonal feasible");
        assert_abs_diff_eq!(sol.plan.get(0, 1), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.plan.get(1, 0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn vertex_support_size_bound() {
        let mut r = rng(37);
        for _ in 0..30 {
            let n0 = r.gen_range(1..=4);
            let n1 = r.gen_range(1..=4);
            let cost =
                CostMatrix::from_fn(n0, n1, |_, _| r.gen_range(0.0..3.0)).unwrap();
            let p0 = random_simplex_weights(&mut r, n0);
            let p1 = random_simplex_weights(&mut r, n1);
            let sol = solve_transport(&cost, &p0, &p1).unwrap();
            assert!(sol.plan.support().len() <= n0 + n1 - 1);
        }
    }

    #[test]
    fn matches_enumeration_oracle() {
        let mut r = rng(41);
        for _ in 0..60 {
            let n0 = r.gen_range(1..=4);
            let n1 = r.gen_range(1..=4);
            let cost =
                CostMatrix::from_fn(n0, n1, |_, _| r.gen_range(0.0..4.0)).unwrap();
            let p0 = random_simplex_weights(&mut r, n0);
            let p1 = random_simplex_weights(&mut r, n1);
            let masked = r.gen_bool(0.5);
            let mask = if masked {
                Mask::from_fn(n0, n1, |_, _| r.gen_bool(0.7))
            } else {
                Mask::full(n0, n1)
            };
            let solver = solve_transport_masked(&cost, &p0, &p1, &mask).unwrap();
            let oracle = enumerate_transport_vertices(&cost, &p0, &p1, Some(&mask)).unwrap();
            match (solver, oracle) {
                (LpOutcome::Solved(s), EnumeratedOptimum::Value(v)) => {
                    assert!(
                        (s.value - v).abs() <= 1e-9,
                        "solver {} vs oracle {v}",
                        s.value
                    );
                    s.plan.validate().unwrap();
                }
                (LpOutcome::Infeasible, EnumeratedOptimum::EmptyPolytope) => {
                    assert!(!mask_feasible(&p0, &p1, &mask));
                }
                (a, b) => panic!("solver/oracle disagree: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn zero_weight_components_reinserted() {
        let cost = CostMatrix::new(3, 2, vec![1.0, 2.0, 0.0, 0.0, 3.0, 1.0]).unwrap();
        let p0 = [0.5, 0.0, 0.5];
        let p1 = [0.5, 0.5];
        let sol = solve_transport(&cost, &p0, &p1).unwrap();
        assert_eq!(sol.plan.rows(), 3);
        assert_abs_diff_eq!(sol.plan.get(1, 0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.plan.get(1, 1), 0.0, epsilon = 1e-15);
        sol.plan.validate().unwrap();
    }

    #[test]
    fn rejects_marginal_mismatch_and_negative_weights() {
        let cost = CostMatrix::new(1, 1, vec![1.0]).unwrap();
        assert!(matches!(
            solve_transport(&cost, &[1.0], &[0.5]),
            Err(Error::MarginalMismatch { .. })
        ));
        let cost2 = CostMatrix::new(2, 2, vec![1.0; 4]).unwrap();
        assert!(matches!(
            solve_transport(&cost2, &[-0.1, 1.1], &[0.5, 0.5]),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn gluing_composition_is_feasible() {
        let mut r = rng(43);
        for _ in 0..20 {
            let n = r.gen_range(2..=4);
            let p0 = random_simplex_weights(&mut r, n);
            let p1 = random_simplex_weights(&mut r, n);
            let p2 = random_simplex_weights(&mut r, n);
            let c01 = CostMatrix::from_fn(n, n, |_, _| r.gen_range(0.0..2.0)).unwrap();
            let c12 = CostMatrix::from_fn(n, n, |_, _| r.gen_range(0.0..2.0)).unwrap();
            let s01 = solve_transport(&c01, &p0, &p1).unwrap();
            let s12 = solve_transport(&c12, &p1, &p2).unwrap();
            let composed = compose_plans(&s01.plan, &s12.plan).unwrap();
            composed.validate().unwrap();
        }
    }
}

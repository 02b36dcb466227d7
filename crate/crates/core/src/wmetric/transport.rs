use crate::error::{Error, Result};
use crate::wmetric::measure::DiscreteMeasure;

/// Largest support the exact solver accepts.
pub const MAX_SUPPORT: usize = 64;

const EPS: f64 = 1e-15;

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

/// Residual graph for a transportation problem.
struct Network {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(nodes: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge {
            to: from,
            cap: 0.0,
            cost: -cost,
        });
    }

    /// Successive shortest augmenting paths (Bellman-Ford, since residual
    /// costs may be negative). Returns the total cost of the flow sent.
    fn min_cost_flow(&mut self, s: usize, t: usize, demand: f64) -> f64 {
        let n = self.adj.len();
        let mut sent = 0.0;
        let mut cost = 0.0;
        while demand - sent > EPS {
            let mut dist = vec![f64::INFINITY; n];
            let mut via = vec![usize::MAX; n];
            dist[s] = 0.0;
            for _ in 0..n {
                let mut changed = false;
                for u in 0..n {
                    if dist[u] == f64::INFINITY {
                        continue;
                    }
                    for &e in &self.adj[u] {
                        let edge = &self.edges[e];
                        if edge.cap > EPS && dist[u] + edge.cost < dist[edge.to] - 1e-15 {
                            dist[edge.to] = dist[u] + edge.cost;
                            via[edge.to] = e;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[t] == f64::INFINITY {
                break;
            }
            let mut push = demand - sent;
            let mut v = t;
            while v != s {
                let e = via[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
            sent += push;
            cost += push * dist[t];
        }
        cost
    }
}

/// Exact `W_p(μ, ν)` for `p ∈ {1, 2}` with Euclidean ground distance,
/// solving the transport linear program over couplings by min-cost flow.
pub fn exact_wp_discrete(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: u32) -> Result<f64> {
    if p != 1 && p != 2 {
        return Err(Error::config(format!("p must be 1 or 2, got {p}")));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::config("measures live in different dimensions"));
    }
    let size = mu.len().max(nu.len());
    if size > MAX_SUPPORT {
        return Err(Error::Scale {
            size,
            limit: MAX_SUPPORT,
        });
    }
    let (m, k) = (mu.len(), nu.len());
    let s = m + k;
    let t = s + 1;
    let mut net = Network::new(m + k + 2);
    for i in 0..m {
        net.add(s, i, mu.weights()[i], 0.0);
    }
    for j in 0..k {
        net.add(m + j, t, nu.weights()[j], 0.0);
    }
    for i in 0..m {
        for j in 0..k {
            let d2: f64 = mu
                .points()
                .row_slice(i)
                .iter()
                .zip(nu.points().row_slice(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let c = if p == 1 { d2.sqrt() } else { d2 };
            net.add(i, m + j, f64::INFINITY, c);
        }
    }
    let total: f64 = mu
        .weights()
        .iter()
        .sum::<f64>()
        .min(nu.weights().iter().sum());
    let cost = net.min_cost_flow(s, t, total).max(0.0);
    Ok(if p == 1 { cost } else { cost.sqrt() })
}

//! Event-driven simulation of the random-walk + birth–death particle
//! system on a step kernel.
//!
//! Each of the n cells holds an integer particle count m_k; ell is the
//! density scale, so the observable state is the density X_k = m_k / ell.
//! Transitions and their rates:
//!
//! * migration k -> i (i != k): m_k * A[k][i] / n, moving one particle;
//! * birth at k: ell * b(m_k / ell);
//! * death at k: ell * d(m_k / ell).
//!
//! The simulation is exact Gillespie: exponential waiting times with the
//! total rate, the event drawn proportionally. Per-node composite rates live
//! in a Fenwick tree (O(log n) per update); migration destinations come from
//! static per-row cumulative tables, which works because the row factorizes
//! as m_k times a fixed profile. Rates of affected nodes are recomputed from
//! scratch at every event and the tree is rebuilt periodically, so float
//! drift never accumulates.
//!
//! Runaway growth is guarded by a hard per-node cap standing in for the
//! stopping time of the underlying construction: an event that would push a
//! count past the cap truncates the trajectory at that instant (flagged,
//! event not applied). A state with zero total rate is absorbing and simply
//! ends the run at the horizon. Everything is bit-reproducible given the
//! seed and stream; diagnostics over the finished trajectory live in
//! [`diagnostics`].

pub mod diagnostics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::dynamics::{DynamicsError, ScalarFamily};
use crate::gridfn::{GridError, GridFunction};
use crate::kernel::{KernelError, StepGraphon};

/// Events between Fenwick-tree rebuilds from exact leaves.
const REBUILD_EVERY: u64 = 4096;

#[derive(Debug, Error)]
pub enum ParticleError {
    #[error("cap {cap} is below the largest initial count {max0}")]
    CapBelowInitial { cap: u64, max0: u64 },
    #[error("density scale must be positive and finite, got {ell}")]
    InvalidScale { ell: f64 },
    #[error("dimension mismatch: kernel has n={expected}, counts have n={got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("time {t} outside the trajectory's range [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("reaction does not match the simulated families: {0}")]
    FamilyMismatch(String),
    #[error("node index {k} out of range for n={n}")]
    NodeOutOfRange { k: usize, n: usize },
    #[error("invalid horizon {t}")]
    InvalidHorizon { t: f64 },
    #[error("invalid event log: {0}")]
    InvalidEventLog(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Particle counts with their density scale at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    counts: Vec<u64>,
    ell: f64,
    t: f64,
}

impl ParticleState {
    pub fn new(counts: Vec<u64>, ell: f64, t: f64) -> Result<Self, ParticleError> {
        if counts.is_empty() {
            return Err(ParticleError::InvalidEventLog("empty count vector".into()));
        }
        if !(ell > 0.0) || !ell.is_finite() {
            return Err(ParticleError::InvalidScale { ell });
        }
        if !t.is_finite() || t < 0.0 {
            return Err(ParticleError::InvalidHorizon { t });
        }
        Ok(ParticleState { counts, ell, t })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Density view m_k / ell as a grid function.
    pub fn density(&self) -> GridFunction {
        GridFunction::new(self.counts.iter().map(|m| *m as f64 / self.ell).collect())
            .expect("counts finite, ell positive")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Migrate { from: usize, to: usize },
    Birth { node: usize },
    Death { node: usize },
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Migrate { .. } => "migrate",
            EventKind::Birth { .. } => "birth",
            EventKind::Death { .. } => "death",
        }
    }

    /// Nodes whose count changes (one for birth/death, two for migration).
    pub fn touches(&self, k: usize) -> bool {
        match self {
            EventKind::Migrate { from, to } => *from == k || *to == k,
            EventKind::Birth { node } | EventKind::Death { node } => *node == k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// A finished simulation: the initial state, the ordered event log, and the
/// horizon up to which the trajectory is defined. If `capped` is set, the
/// run was truncated at `horizon` by an event that would have pushed a count
/// past `cap` (that event is not in the log).
#[derive(Debug, Clone)]
pub struct ParticleTrajectory {
    initial: ParticleState,
    events: Vec<Event>,
    horizon: f64,
    cap: u64,
    capped: bool,
    birth: ScalarFamily,
    death: ScalarFamily,
    seed: u64,
    stream: u64,
}

impl ParticleTrajectory {
    /// Rebuild a trajectory from its parts, validating every invariant the
    /// simulator guarantees: strictly increasing event times within
    /// (0, horizon], indices in range, no self-migrations, counts never
    /// negative, deaths only at occupied nodes, and counts within the cap
    /// unless the capped flag is set.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        initial: ParticleState,
        events: Vec<Event>,
        horizon: f64,
        cap: u64,
        capped: bool,
        birth: ScalarFamily,
        death: ScalarFamily,
        seed: u64,
        stream: u64,
    ) -> Result<Self, ParticleError> {
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(ParticleError::InvalidHorizon { t: horizon });
        }
        birth.validate_nonnegative()?;
        death.validate_nonnegative()?;
        let n = initial.n();
        let max0 = initial.counts().iter().copied().max().unwrap_or(0);
        if cap < max0 {
            return Err(ParticleError::CapBelowInitial { cap, max0 });
        }
        let mut counts = initial.counts().to_vec();
        let mut prev = 0.0f64;
        for (idx, ev) in events.iter().enumerate() {
            if !(ev.time > prev) || ev.time > horizon {
                return Err(ParticleError::InvalidEventLog(format!(
                    "event {idx} at t={} breaks strict ordering within (0, {horizon}]",
                    ev.time
                )));
            }
            prev = ev.time;
            apply_event(&mut counts, ev.kind, cap, capped).map_err(|e| {
                ParticleError::InvalidEventLog(format!("event {idx} at t={}: {e}", ev.time))
            })?;
            if counts.len() != n {
                unreachable!("apply_event preserves length");
            }
        }
        Ok(ParticleTrajectory {
            initial,
            events,
            horizon,
            cap,
            capped,
            birth,
            death,
            seed,
            stream,
        })
    }

    pub fn initial(&self) -> &ParticleState {
        &self.initial
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn capped(&self) -> bool {
        self.capped
    }

    pub fn birth(&self) -> ScalarFamily {
        self.birth
    }

    pub fn death(&self) -> ScalarFamily {
        self.death
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn n(&self) -> usize {
        self.initial.n()
    }

    pub fn ell(&self) -> f64 {
        self.initial.ell()
    }

    /// State at time t (right-continuous: an event at exactly t is applied).
    pub fn state_at(&self, t: f64) -> Result<ParticleState, ParticleError> {
        self.check_time(t)?;
        let mut counts = self.initial.counts().to_vec();
        for ev in &self.events {
            if ev.time > t {
                break;
            }
            apply_event(&mut counts, ev.kind, self.cap, self.capped)
                .expect("validated log replays");
        }
        ParticleState::new(counts, self.ell(), t)
    }

    /// Density m/ell at time t.
    pub fn density_at(&self, t: f64) -> Result<GridFunction, ParticleError> {
        Ok(self.state_at(t)?.density())
    }

    /// Visit the maximal intervals [a, b) on which the counts are constant,
    /// covering [0, t_end]; the final call closes at t_end. Events exactly
    /// at t_end are not applied (they carry no measure for integrals).
    pub fn for_each_interval<F>(&self, t_end: f64, mut f: F) -> Result<(), ParticleError>
    where
        F: FnMut(f64, f64, &[u64]),
    {
        self.check_time(t_end)?;
        let mut counts = self.initial.counts().to_vec();
        let mut prev = 0.0f64;
        for ev in &self.events {
            if ev.time >= t_end {
                break;
            }
            if ev.time > prev {
                f(prev, ev.time, &counts);
            }
            apply_event(&mut counts, ev.kind, self.cap, self.capped)
                .expect("validated log replays");
            prev = ev.time;
        }
        if t_end > prev {
            f(prev, t_end, &counts);
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<(), ParticleError> {
        if !t.is_finite() || t < 0.0 || t > self.horizon {
            return Err(ParticleError::TimeOutOfRange { t, horizon: self.horizon });
        }
        Ok(())
    }

    /// Event log as CSV: time,kind,k,i — with i empty for birth and death.
    pub fn events_csv(&self) -> String {
        use crate::harness::io::fmt_float;
        let mut out = String::from("time,kind,k,i\n");
        for ev in &self.events {
            let (k, i) = match ev.kind {
                EventKind::Migrate { from, to } => (from, to.to_string()),
                EventKind::Birth { node } | EventKind::Death { node } => (node, String::new()),
            };
            out.push_str(&format!("{},{},{k},{i}\n", fmt_float(ev.time), ev.kind.label()));
        }
        out
    }

    /// JSON sidecar with everything needed to reproduce the run.
    pub fn meta_json(&self) -> String {
        let doc = serde_json::json!({
            "seed": self.seed,
            "stream": self.stream,
            "cap": self.cap,
            "capped": self.capped,
            "horizon": self.horizon,
            "ell": self.ell(),
            "n": self.n(),
            "birth": self.birth.to_string(),
            "death": self.death.to_string(),
            "initial": self.initial.counts(),
            "event_count": self.events.len(),
        });
        serde_json::to_string_pretty(&doc).expect("metadata serializes")
    }
}

fn apply_event(counts: &mut [u64], kind: EventKind, cap: u64, capped: bool) -> Result<(), String> {
    let n = counts.len();
    let bump = |counts: &mut [u64], node: usize| -> Result<(), String> {
        if counts[node] >= cap && !capped {
            return Err(format!("count at node {node} would exceed cap {cap}"));
        }
        counts[node] += 1;
        Ok(())
    };
    let drop = |counts: &mut [u64], node: usize| -> Result<(), String> {
        if counts[node] == 0 {
            return Err(format!("death or departure at empty node {node}"));
        }
        counts[node] -= 1;
        Ok(())
    };
    match kind {
        EventKind::Migrate { from, to } => {
            if from >= n || to >= n {
                return Err(format!("node index out of range (n={n})"));
            }
            if from == to {
                return Err("self-migration is not a transition".into());
            }
            drop(counts, from)?;
            bump(counts, to)
        }
        EventKind::Birth { node } => {
            if node >= n {
                return Err(format!("node index out of range (n={n})"));
            }
            bump(counts, node)
        }
        EventKind::Death { node } => {
            if node >= n {
                return Err(format!("node index out of range (n={n})"));
            }
            drop(counts, node)
        }
    }
}

impl ScalarFamily {
    fn validate_nonnegative(self) -> Result<(), ParticleError> {
        let r = self.rate();
        if !r.is_finite() || r < 0.0 {
            return Err(ParticleError::Dynamics(DynamicsError::InvalidReaction(format!(
                "rate family {self} needs a finite nonnegative rate"
            ))));
        }
        Ok(())
    }
}

/// Fenwick (binary indexed) tree over per-node rates: prefix sums, point
/// assignment, and inverse-CDF selection, all O(log n). Leaves are kept
/// exactly so the internal sums can be rebuilt to kill accumulated drift.
struct RateTree {
    n: usize,
    leaves: Vec<f64>,
    tree: Vec<f64>,
}

impl RateTree {
    fn new(leaves: Vec<f64>) -> Self {
        let n = leaves.len();
        let mut t = RateTree { n, leaves, tree: vec![0.0; n + 1] };
        t.rebuild();
        t
    }

    fn rebuild(&mut self) {
        self.tree.iter_mut().for_each(|v| *v = 0.0);
        for i in 1..=self.n {
            self.tree[i] += self.leaves[i - 1];
            let parent = i + (i & i.wrapping_neg());
            if parent <= self.n {
                let v = self.tree[i];
                self.tree[parent] += v;
            }
        }
    }

    fn set(&mut self, i: usize, value: f64) {
        let delta = value - self.leaves[i];
        self.leaves[i] = value;
        let mut idx = i + 1;
        while idx <= self.n {
            self.tree[idx] += delta;
            idx += idx & idx.wrapping_neg();
        }
    }

    fn leaf(&self, i: usize) -> f64 {
        self.leaves[i]
    }

    fn total(&self) -> f64 {
        let mut s = 0.0;
        let mut idx = self.n;
        while idx > 0 {
            s += self.tree[idx];
            idx &= idx - 1;
        }
        s
    }

    /// Largest index pos with prefix(pos) <= u, plus the residual
    /// u - prefix(pos). For u in [0, total) the selected leaf is pos.
    fn select(&self, mut u: f64) -> (usize, f64) {
        let mut pos = 0usize;
        let mut bit = (self.n + 1).next_power_of_two() / 2;
        while bit != 0 {
            let next = pos + bit;
            if next <= self.n && self.tree[next] <= u {
                u -= self.tree[next];
                pos = next;
            }
            bit >>= 1;
        }
        (pos, u)
    }
}

/// Run the process to `t_end` with the default stream (0).
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    g: &StepGraphon,
    birth: ScalarFamily,
    death: ScalarFamily,
    m0: &[u64],
    ell: f64,
    t_end: f64,
    cap: u64,
    seed: u64,
) -> Result<ParticleTrajectory, ParticleError> {
    simulate_stream(g, birth, death, m0, ell, t_end, cap, seed, 0)
}

/// Run the process to `t_end`. RNG is a counter-based generator seeded by
/// `seed` with an independent `stream` per run, so replica r of sweep rung
/// g conventionally uses stream (g << 32) | r and is reproducible no matter
/// how runs are scheduled.
#[allow(clippy::too_many_arguments)]
pub fn simulate_stream(
    g: &StepGraphon,
    birth: ScalarFamily,
    death: ScalarFamily,
    m0: &[u64],
    ell: f64,
    t_end: f64,
    cap: u64,
    seed: u64,
    stream: u64,
) -> Result<ParticleTrajectory, ParticleError> {
    let n = g.n();
    if m0.len() != n {
        return Err(ParticleError::DimensionMismatch { expected: n, got: m0.len() });
    }
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(ParticleError::InvalidScale { ell });
    }
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(ParticleError::InvalidHorizon { t: t_end });
    }
    birth.validate_nonnegative()?;
    death.validate_nonnegative()?;
    let max0 = m0.iter().copied().max().unwrap_or(0);
    if cap < max0 {
        return Err(ParticleError::CapBelowInitial { cap, max0 });
    }

    let nf = n as f64;
    // migration row profiles: off-diagonal row sums and cumulative tables
    let mut row_off = vec![0.0f64; n];
    let mut row_cum: Vec<Vec<(f64, usize)>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut cum = 0.0;
        let mut table = Vec::new();
        for i in 0..n {
            if i != k && g.entry(k, i) > 0.0 {
                cum += g.entry(k, i);
                table.push((cum, i));
            }
        }
        row_off[k] = cum / nf;
        row_cum.push(table);
    }

    let node_rate = |m: u64, k: usize| -> f64 {
        let x = m as f64 / ell;
        m as f64 * row_off[k] + ell * (birth.eval(x) + death.eval(x))
    };

    let mut counts = m0.to_vec();
    let mut tree = RateTree::new((0..n).map(|k| node_rate(counts[k], k)).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let mut events: Vec<Event> = Vec::new();
    let mut t = 0.0f64;
    let mut horizon = t_end;
    let mut capped = false;
    let mut since_rebuild = 0u64;

    loop {
        let total = tree.total();
        if !(total > 0.0) {
            break; // absorbed: nothing can happen until the horizon
        }
        let wait = rng.sample::<f64, _>(Exp1) / total;
        let t_next = t + wait;
        if !(t_next > t) {
            continue; // wait below time resolution: redraw
        }
        if t_next > t_end {
            break;
        }

        let (mut k, mut residual) = tree.select(rng.gen::<f64>() * total);
        if k >= n {
            // float overshoot at the very top of the CDF
            k = n - 1;
            residual = tree.leaf(k);
        }
        let rate_k = tree.leaf(k);
        if !(rate_k > 0.0) {
            continue;
        }
        residual = residual.min(rate_k);
        let mig_total = counts[k] as f64 * row_off[k];
        let x = counts[k] as f64 / ell;
        let rate_b = ell * birth.eval(x);
        let rate_d = ell * death.eval(x);

        // each branch requires a strictly positive channel rate, so float
        // overshoot at a region boundary can never propose an impossible event
        let kind = if mig_total > 0.0 && (residual < mig_total || rate_b + rate_d == 0.0) {
            // residual = (m_k / n) * v with v uniform on the row cumulative
            let v = residual * nf / counts[k] as f64;
            let table = &row_cum[k];
            let idx = table.partition_point(|(c, _)| *c <= v).min(table.len() - 1);
            EventKind::Migrate { from: k, to: table[idx].1 }
        } else if rate_b > 0.0 && (residual - mig_total < rate_b || rate_d == 0.0) {
            EventKind::Birth { node: k }
        } else if rate_d > 0.0 {
            EventKind::Death { node: k }
        } else {
            continue;
        };

        let grows = match kind {
            EventKind::Migrate { to, .. } => Some(to),
            EventKind::Birth { node } => Some(node),
            EventKind::Death { .. } => None,
        };
        if let Some(node) = grows {
            if counts[node] + 1 > cap {
                capped = true;
                horizon = t_next;
                break;
            }
        }

        apply_event(&mut counts, kind, cap, true).expect("simulator proposes valid events");
        events.push(Event { time: t_next, kind });
        t = t_next;

        match kind {
            EventKind::Migrate { from, to } => {
                tree.set(from, node_rate(counts[from], from));
                tree.set(to, node_rate(counts[to], to));
            }
            EventKind::Birth { node } | EventKind::Death { node } => {
                tree.set(node, node_rate(counts[node], node));
            }
        }
        since_rebuild += 1;
        if since_rebuild >= REBUILD_EVERY {
            tree.rebuild();
            since_rebuild = 0;
        }
    }

    ParticleTrajectory::from_parts(
        ParticleState::new(m0.to_vec(), ell, 0.0)?,
        events,
        horizon,
        cap,
        capped,
        birth,
        death,
        seed,
        stream,
    )
}

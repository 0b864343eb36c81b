//! Population state and the two event types.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::roster::{Allocation, Roster};
use super::sampling::{sample_jl, EdgePool};
use crate::error::{config, Error, Result};
use crate::measures::CountMeasure;

/// How the initially infectious individuals are picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Uniformly among all individuals.
    #[default]
    Uniform,
    /// Successively, each draw proportional to degree.
    SizeBiased,
}

/// Options for [`initialize_state`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    /// Fraction of the population infected at time 0; rounded up.
    pub i0: f64,
    pub selection: Selection,
    /// Pair the initial infectives' half-edges uniformly among all half-edges
    /// and drop the ones that land on another infective. Otherwise every
    /// half-edge of an initial infective leads to a susceptible.
    pub pair_initial: bool,
}

impl InitialCondition {
    pub fn new(i0: f64, selection: Selection) -> Self {
        Self {
            i0,
            selection,
            pair_initial: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i0 > 0.0 && self.i0 < 1.0) {
            return config(format!("initial infected fraction must lie in (0, 1), got {}", self.i0));
        }
        Ok(())
    }
}

/// Epidemic rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// Infection rate per `IS` edge.
    pub r: f64,
    /// Removal rate per infectious individual.
    pub beta: f64,
}

impl Rates {
    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return config(format!("infection rate must be a nonnegative number, got {}", self.r));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return config(format!("removal rate must be a nonnegative number, got {}", self.beta));
        }
        Ok(())
    }
}

/// Full state of the finite-population epidemic.
///
/// Susceptibles are described by their degrees only (`μ^S`). Infectious and
/// removed individuals are described by their current number of edges to
/// susceptibles (`d_x(S)`), one roster entry each.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    mu_s: CountMeasure,
    mu_s0: CountMeasure,
    infectious: Roster,
    removed: Roster,
    t: f64,
    population: u64,
}

impl PopulationState {
    /// Builds a state from its parts at time 0.
    pub fn from_parts(mu_s: CountMeasure, infectious: Roster, removed: Roster) -> Result<Self> {
        let population = mu_s.mass() + infectious.len() as u64 + removed.len() as u64;
        if population == 0 {
            return config("empty population");
        }
        if infectious.total() + removed.total() > mu_s.first_moment() {
            return config(format!(
                "edges to susceptibles ({} IS + {} RS) exceed the {} susceptible half-edges",
                infectious.total(),
                removed.total(),
                mu_s.first_moment()
            ));
        }
        Ok(Self {
            mu_s0: mu_s.clone(),
            mu_s,
            infectious,
            removed,
            t: 0.0,
            population,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub(crate) fn set_t(&mut self, t: f64) {
        self.t = t;
    }

    pub fn s(&self) -> u64 {
        self.mu_s.mass()
    }

    pub fn i(&self) -> u64 {
        self.infectious.len() as u64
    }

    pub fn r(&self) -> u64 {
        self.removed.len() as u64
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    /// `N^S = ⟨μ^S, χ⟩`.
    pub fn n_s(&self) -> u64 {
        self.mu_s.first_moment()
    }

    /// `N^IS = ⟨μ^IS, χ⟩`.
    pub fn n_is(&self) -> u64 {
        self.infectious.total()
    }

    /// `N^RS = ⟨μ^RS, χ⟩`.
    pub fn n_rs(&self) -> u64 {
        self.removed.total()
    }

    pub fn pool(&self) -> EdgePool {
        EdgePool {
            n_s: self.n_s(),
            n_is: self.n_is(),
            n_rs: self.n_rs(),
        }
    }

    pub fn mu_s(&self) -> &CountMeasure {
        &self.mu_s
    }

    pub fn mu_s0(&self) -> &CountMeasure {
        &self.mu_s0
    }

    pub fn infectious(&self) -> &Roster {
        &self.infectious
    }

    pub fn removed(&self) -> &Roster {
        &self.removed
    }

    pub fn mu_is(&self) -> CountMeasure {
        self.infectious.to_measure()
    }

    pub fn mu_rs(&self) -> CountMeasure {
        self.removed.to_measure()
    }

    /// `r N^IS + β I`.
    pub fn total_event_rate(&self, rates: Rates) -> f64 {
        rates.r * self.n_is() as f64 + rates.beta * self.i() as f64
    }

    /// Checks every structural invariant; used by tests and debug builds.
    pub fn check_invariants(&self) -> Result<()> {
        if self.s() + self.i() + self.r() != self.population {
            return Err(Error::StateCorruption(format!(
                "S + I + R = {} differs from the population {}",
                self.s() + self.i() + self.r(),
                self.population
            )));
        }
        if self.n_is() + self.n_rs() > self.n_s() {
            return Err(Error::StateCorruption(format!(
                "N^IS + N^RS = {} exceeds N^S = {}",
                self.n_is() + self.n_rs(),
                self.n_s()
            )));
        }
        if !self.mu_s.is_dominated_by(&self.mu_s0) {
            return Err(Error::StateCorruption("μ^S gained atoms".into()));
        }
        Ok(())
    }

    /// Infection of a susceptible of degree `k` with `j` other edges to the
    /// infectious class and `l` to the removed class. `u` spreads the `j + 1`
    /// lost `IS` edges (contaminating edge included) over the infectious
    /// roster and `v` spreads the `l` lost `RS` edges over the removed roster.
    ///
    /// The new infective gets `k − 1 − j − l` edges to susceptibles, so
    /// `ΔN^IS = k − 2 − 2j − l` and `ΔN^RS = −l`. When fewer than twice that
    /// many `SS` half-edges exist, each new `SI` edge would need two of them;
    /// the surplus is closed as self-loops and the new infective keeps only
    /// `n_ss − (k − 1 − j − l)` edges (`capped` in the outcome).
    pub fn apply_infection(
        &mut self,
        k: u32,
        j: u32,
        l: u32,
        u: &Allocation,
        v: &Allocation,
    ) -> Result<InfectionOutcome> {
        if self.mu_s.get(k) == 0 {
            return Err(Error::StateCorruption(format!("no susceptible of degree {k}")));
        }
        if k == 0 || j + l > k - 1 {
            return Err(Error::StateCorruption(format!(
                "degree {k} cannot carry j = {j} and l = {l} other edges"
            )));
        }
        if u.total() != u64::from(j) + 1 || v.total() != u64::from(l) {
            return Err(Error::StateCorruption(format!(
                "allocations cover {} IS and {} RS edges, expected {} and {l}",
                u.total(),
                v.total(),
                j + 1
            )));
        }
        for &(i, c) in u.parts() {
            if i >= self.infectious.len() || c > self.infectious.get(i) {
                return Err(Error::StateCorruption(format!(
                    "allocation exceeds infectious individual {i}"
                )));
            }
        }
        for &(i, c) in v.parts() {
            if i >= self.removed.len() || c > self.removed.get(i) {
                return Err(Error::StateCorruption(format!(
                    "allocation exceeds removed individual {i}"
                )));
            }
        }
        let n_ss = self.n_s().saturating_sub(self.n_is() + self.n_rs());
        let open = u64::from(k - 1 - j - l);
        let new_edges = open.min(n_ss.saturating_sub(open)) as u32;

        self.mu_s.mutate(&[(k, -1)])?;
        for &(i, c) in u.parts() {
            self.infectious.decrement(i, c)?;
        }
        for &(i, c) in v.parts() {
            self.removed.decrement(i, c)?;
        }
        self.infectious.push(new_edges);
        Ok(InfectionOutcome {
            new_edges,
            capped: u64::from(new_edges) < open,
        })
    }

    /// Moves infectious individual `index` (0-based) to the removed class
    /// together with its edges to susceptibles. Returns that edge count.
    pub fn apply_removal(&mut self, index: usize) -> Result<u32> {
        if index >= self.infectious.len() {
            return Err(Error::Range {
                index: index as u64 + 1,
                len: self.infectious.len() as u64,
            });
        }
        let c = self.infectious.swap_remove(index);
        self.removed.push(c);
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InfectionOutcome {
    /// Edges to susceptibles of the new infective.
    pub new_edges: u32,
    /// Whether the self-loop cap reduced `new_edges` below `k − 1 − j − l`.
    pub capped: bool,
}

/// What happened at one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventRecord {
    Removal {
        /// Edges to susceptibles carried from `I` to `R`.
        edges: u32,
    },
    Infection {
        k: u32,
        j: u32,
        l: u32,
        new_edges: u32,
        capped: bool,
    },
}

impl EventRecord {
    /// `(ΔN^IS, ΔN^RS)` implied by the record.
    pub fn edge_deltas(&self) -> (i64, i64) {
        match *self {
            EventRecord::Removal { edges } => (-i64::from(edges), i64::from(edges)),
            EventRecord::Infection { j, l, new_edges, .. } => (i64::from(new_edges) - i64::from(j) - 1, -i64::from(l)),
        }
    }
}

/// Draws and applies one event given that one occurs. Does not move time.
///
/// Removal with probability `βI / (rN^IS + βI)` (uniform infectious
/// individual), infection otherwise (size-biased susceptible degree, then
/// `(j, ℓ)`, then the allocations over both rosters).
pub fn execute_event<R: Rng + ?Sized>(state: &mut PopulationState, rates: Rates, rng: &mut R) -> Result<EventRecord> {
    let rate = state.total_event_rate(rates);
    if !(rate > 0.0) {
        return Err(Error::Sampling("no event can occur: total rate is zero".into()));
    }
    #[cfg(debug_assertions)]
    let before = (
        state.s(),
        state.i(),
        state.r(),
        state.n_is() as i64,
        state.n_rs() as i64,
    );

    let removal_rate = rates.beta * state.i() as f64;
    let record = if rng.random::<f64>() * rate < removal_rate {
        let index = rng.random_range(0..state.infectious.len());
        let edges = state.apply_removal(index)?;
        EventRecord::Removal { edges }
    } else {
        let k = state.mu_s.sample_size_biased(rng)?;
        let (j, l) = sample_jl(k, state.pool(), rng)?;
        let u = state.infectious.allocate(u64::from(j) + 1, rng)?;
        let v = state.removed.allocate(u64::from(l), rng)?;
        let outcome = state.apply_infection(k, j, l, &u, &v)?;
        if !outcome.capped {
            debug_assert_eq!(
                i64::from(outcome.new_edges) - i64::from(j) - 1,
                i64::from(k) - 2 - 2 * i64::from(j) - i64::from(l)
            );
        }
        EventRecord::Infection {
            k,
            j,
            l,
            new_edges: outcome.new_edges,
            capped: outcome.capped,
        }
    };

    #[cfg(debug_assertions)]
    {
        let (s, i, r, n_is, n_rs) = before;
        debug_assert_eq!(s + i + r, state.s() + state.i() + state.r());
        let (d_is, d_rs) = record.edge_deltas();
        debug_assert_eq!(state.n_is() as i64 - n_is, d_is);
        debug_assert_eq!(state.n_rs() as i64 - n_rs, d_rs);
        debug_assert!(state.check_invariants().is_ok(), "{:?}", state.check_invariants());
    }
    Ok(record)
}

/// Builds the initial state from a degree sequence: `⌈i0 · n⌉` individuals
/// become infectious and the rest stay susceptible.
pub fn initialize_state<R: Rng + ?Sized>(
    degrees: &[u32],
    init: InitialCondition,
    rng: &mut R,
) -> Result<PopulationState> {
    if degrees.is_empty() {
        return config("empty degree sequence");
    }
    init.validate()?;
    let n = degrees.len();
    let n_inf = ((init.i0 * n as f64).ceil() as usize).max(1);
    if n_inf >= n {
        return config(format!(
            "i0 = {} infects {n_inf} of {n} individuals; at least one susceptible is required",
            init.i0
        ));
    }

    let chosen = select_initial(degrees, n_inf, init.selection, rng)?;

    let mut infected = vec![false; n];
    for &x in &chosen {
        infected[x] = true;
    }
    let mu_s = CountMeasure::from_levels(degrees.iter().zip(&infected).filter(|(_, &inf)| !inf).map(|(&d, _)| d));
    let mut edges: Vec<u32> = chosen.iter().map(|&x| degrees[x]).collect();
    if init.pair_initial {
        pair_initial_half_edges(&mut edges, mu_s.first_moment(), rng);
    }
    let n_is: u64 = edges.iter().map(|&d| u64::from(d)).sum();
    if n_is > mu_s.first_moment() {
        return config(format!(
            "initial infectives carry {n_is} half-edges but susceptibles only {}; \
             use pair_initial to pair the surplus among infectives",
            mu_s.first_moment()
        ));
    }
    PopulationState::from_parts(mu_s, Roster::from_counts(edges), Roster::new())
}

/// Indices (sorted) of `count` distinct individuals chosen as initially
/// infectious.
pub fn select_initial<R: Rng + ?Sized>(
    degrees: &[u32],
    count: usize,
    selection: Selection,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if count > degrees.len() {
        return config(format!("cannot select {count} of {} individuals", degrees.len()));
    }
    let mut chosen = match selection {
        Selection::Uniform => rand::seq::index::sample(rng, degrees.len(), count).into_vec(),
        Selection::SizeBiased => {
            let mut weights = Roster::from_counts(degrees.iter().copied());
            let mut v = Vec::with_capacity(count);
            for _ in 0..count {
                if weights.total() == 0 {
                    return config("not enough individuals of positive degree for size-biased selection");
                }
                let who = weights.owner_of(rng.random_range(0..weights.total()));
                weights.decrement(who, weights.get(who))?;
                v.push(who);
            }
            v
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

/// Uniform pairing restricted to the infectives' half-edges: each one is
/// matched with a uniformly chosen other free half-edge; pairs landing on two
/// infectives are dropped from both.
fn pair_initial_half_edges<R: Rng + ?Sized>(edges: &mut [u32], susceptible_half_edges: u64, rng: &mut R) {
    let mut free: Vec<usize> = edges
        .iter()
        .enumerate()
        .flat_map(|(x, &d)| std::iter::repeat_n(x, d as usize))
        .collect();
    let mut free_s = susceptible_half_edges;
    while let Some(pos) = (!free.is_empty()).then(|| rng.random_range(0..free.len())) {
        let owner = free.swap_remove(pos);
        let others = free.len() as u64 + free_s;
        if others == 0 {
            // An odd half-edge with nothing left to pair: it closes on itself.
            edges[owner] -= 1;
            break;
        }
        let pick = rng.random_range(0..others);
        if pick < free.len() as u64 {
            let partner = free.swap_remove(pick as usize);
            edges[owner] -= 1;
            edges[partner] -= 1;
        } else {
            free_s -= 1;
        }
    }
}

//! Individual-level state of the household–workplace SIR process and its
//! exact event-driven dynamics.
//!
//! Infections are Markovian given the current state: the pooled infection
//! rate is constant between events, so an exponential clock is raced against
//! the earliest scheduled recovery. Recoveries are scheduled as absolute
//! times drawn from the infectious-period law at infection, which makes the
//! scheme exact for any law. With exponential periods a fast path replaces
//! the recovery queue by a rate `γ·I` channel.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::params::EpidemicParams;
use crate::error::{Error, Result};
use crate::fenwick::FenwickSampler;
use crate::graph::{Layer, PopulationGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Susceptible,
    Infected,
    Recovered,
}

/// Contact layer through which an infection happened.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "G")]
    Global,
    #[serde(rename = "H")]
    Household,
    #[serde(rename = "W")]
    Workplace,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Global, Channel::Household, Channel::Workplace];

    fn index(self) -> usize {
        match self {
            Channel::Global => 0,
            Channel::Household => 1,
            Channel::Workplace => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Infection,
    Recovery,
}

/// One executed event; serialized as a line of the JSON event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub layer: Option<Channel>,
    pub individual: u32,
    pub household: u32,
    pub workplace: u32,
}

/// Outcome of [`SimulationState::advance`].
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Event(Event),
    /// No event before the horizon; the clock now equals the horizon.
    Horizon,
    /// No infected individual is left.
    Extinct,
}

/// Per-layer infection rates `(rate_G, rate_H, rate_W)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfectionRates {
    pub global: f64,
    pub household: f64,
    pub workplace: f64,
}

impl InfectionRates {
    pub fn total(&self) -> f64 {
        self.global + self.household + self.workplace
    }
}

#[derive(Clone, Copy, Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    individual: u32,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

/// How recoveries are generated.
#[derive(Clone, Debug)]
enum Recoveries {
    /// Min-queue of absolute recovery times, ties broken by insertion order.
    Scheduled(BinaryHeap<Reverse<Scheduled>>),
    /// Exponential periods: recovery is a rate `γ·I` channel picking a
    /// uniform infected individual.
    Markovian {
        gamma: f64,
        infected: Vec<u32>,
        position: Vec<u32>,
    },
}

/// Cached per-structure counts of one layer.
#[derive(Clone, Debug)]
struct LayerCounts {
    susceptible: Vec<u32>,
    infected: Vec<u32>,
    /// Weights `s_k`.
    by_susceptible: FenwickSampler,
    /// Weights `s_k·i_k`; the total is the layer aggregate `A_X`.
    by_pairs: FenwickSampler,
}

impl LayerCounts {
    fn new(sizes: impl Iterator<Item = usize>) -> Self {
        let susceptible: Vec<u32> = sizes.map(|n| n as u32).collect();
        let n = susceptible.len();
        Self {
            by_susceptible: FenwickSampler::new(susceptible.iter().map(|&s| s as u64).collect()),
            by_pairs: FenwickSampler::new(vec![0; n]),
            infected: vec![0; n],
            susceptible,
        }
    }

    fn refresh(&mut self, k: usize) {
        let s = self.susceptible[k] as u64;
        self.by_susceptible.set(k, s);
        self.by_pairs.set(k, s * self.infected[k] as u64);
    }

    fn on_infection(&mut self, k: usize) {
        self.susceptible[k] -= 1;
        self.infected[k] += 1;
        self.refresh(k);
    }

    fn on_recovery(&mut self, k: usize) {
        self.infected[k] -= 1;
        self.refresh(k);
    }
}

/// Result of [`SimulationState::check_consistency`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConsistencyReport {
    pub diffs: Vec<String>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// Number of structures of each `(S, I)` composition in both layers, with
/// the population totals they were taken from. Counts are real-valued so
/// that histograms can be averaged over replicates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "HistogramRecord", try_from = "HistogramRecord")]
pub struct TypeHistogram {
    pub population: f64,
    pub structures: [f64; 2],
    pub susceptible: f64,
    pub infected: f64,
    /// Per layer (household, workplace): `(S, I) -> count`.
    pub counts: [BTreeMap<(usize, usize), f64>; 2],
}

impl TypeHistogram {
    pub fn layer(&self, layer: Layer) -> &BTreeMap<(usize, usize), f64> {
        &self.counts[layer_index(layer)]
    }

    pub fn structure_count(&self, layer: Layer) -> f64 {
        self.structures[layer_index(layer)]
    }

    /// Entrywise average of several histograms.
    pub fn average<'a, I>(items: I) -> Option<TypeHistogram>
    where
        I: IntoIterator<Item = &'a TypeHistogram>,
    {
        let mut acc = TypeHistogram::default();
        let mut n = 0usize;
        for h in items {
            n += 1;
            acc.population += h.population;
            acc.susceptible += h.susceptible;
            acc.infected += h.infected;
            for x in 0..2 {
                acc.structures[x] += h.structures[x];
                for (key, c) in &h.counts[x] {
                    *acc.counts[x].entry(*key).or_insert(0.0) += c;
                }
            }
        }
        if n == 0 {
            return None;
        }
        let n = n as f64;
        acc.population /= n;
        acc.susceptible /= n;
        acc.infected /= n;
        for x in 0..2 {
            acc.structures[x] /= n;
            acc.counts[x].values_mut().for_each(|c| *c /= n);
        }
        Some(acc)
    }
}

/// Flat serialised form of [`TypeHistogram`].
#[derive(Serialize, Deserialize)]
struct HistogramRecord {
    population: f64,
    household_count: f64,
    workplace_count: f64,
    susceptible: f64,
    infected: f64,
    entries: Vec<HistogramEntry>,
}

#[derive(Serialize, Deserialize)]
struct HistogramEntry {
    layer: Layer,
    #[serde(rename = "S")]
    s: usize,
    #[serde(rename = "I")]
    i: usize,
    count: f64,
}

impl From<TypeHistogram> for HistogramRecord {
    fn from(h: TypeHistogram) -> Self {
        let entries = Layer::BOTH
            .iter()
            .flat_map(|&layer| {
                h.layer(layer)
                    .iter()
                    .map(move |(&(s, i), &count)| HistogramEntry { layer, s, i, count })
            })
            .collect();
        Self {
            population: h.population,
            household_count: h.structures[0],
            workplace_count: h.structures[1],
            susceptible: h.susceptible,
            infected: h.infected,
            entries,
        }
    }
}

impl TryFrom<HistogramRecord> for TypeHistogram {
    type Error = Error;

    fn try_from(r: HistogramRecord) -> Result<Self> {
        let mut h = TypeHistogram {
            population: r.population,
            structures: [r.household_count, r.workplace_count],
            susceptible: r.susceptible,
            infected: r.infected,
            ..Default::default()
        };
        for e in r.entries {
            if h.counts[layer_index(e.layer)].insert((e.s, e.i), e.count).is_some() {
                return Err(Error::InconsistentHistogram(format!(
                    "duplicate {} entry ({}, {})",
                    e.layer.tag(),
                    e.s,
                    e.i
                )));
            }
        }
        Ok(h)
    }
}

pub(crate) fn layer_index(layer: Layer) -> usize {
    match layer {
        Layer::Household => 0,
        Layer::Workplace => 1,
    }
}

#[derive(Clone, Debug)]
pub struct SimulationState {
    graph: PopulationGraph,
    status: Vec<Status>,
    infected_at: Vec<f64>,
    recovery_at: Vec<f64>,
    recoveries: Recoveries,
    seq: u64,
    layers: [LayerCounts; 2],
    susceptible: u64,
    infected: u64,
    recovered: u64,
    cumulative: [u64; 3],
    t: f64,
}

impl SimulationState {
    /// All individuals susceptible at time 0.
    pub fn new(graph: PopulationGraph) -> Self {
        let k = graph.size();
        let layers = [
            LayerCounts::new(graph.layer(Layer::Household).sizes()),
            LayerCounts::new(graph.layer(Layer::Workplace).sizes()),
        ];
        Self {
            graph,
            status: vec![Status::Susceptible; k],
            infected_at: vec![f64::NAN; k],
            recovery_at: vec![f64::NAN; k],
            recoveries: Recoveries::Scheduled(BinaryHeap::new()),
            seq: 0,
            layers,
            susceptible: k as u64,
            infected: 0,
            recovered: 0,
            cumulative: [0; 3],
            t: 0.0,
        }
    }

    /// Seeds `round(ε·K)` uniformly chosen individuals (ties to even), each
    /// with an independent infectious period.
    pub fn init_uniform_seed<R: Rng + ?Sized>(
        graph: PopulationGraph,
        params: &EpidemicParams,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "initial infected fraction must lie in [0, 1], got {epsilon}"
            )));
        }
        params.validate()?;
        let k = graph.size();
        let count = (epsilon * k as f64).round_ties_even() as usize;
        let mut state = Self::new(graph);
        for ind in rand::seq::index::sample(rng, k, count).into_iter() {
            state.seed(ind, params, rng);
        }
        Ok(state)
    }

    /// One uniformly chosen infected individual.
    pub fn init_single_seed<R: Rng + ?Sized>(
        graph: PopulationGraph,
        params: &EpidemicParams,
        rng: &mut R,
    ) -> Result<Self> {
        params.validate()?;
        let k = graph.size();
        let mut state = Self::new(graph);
        let ind = rng.random_range(0..k);
        state.seed(ind, params, rng);
        Ok(state)
    }

    /// Infects `individual` at the current time without counting it as a
    /// transmission.
    pub fn seed<R: Rng + ?Sized>(&mut self, individual: usize, params: &EpidemicParams, rng: &mut R) {
        assert_eq!(
            self.status[individual],
            Status::Susceptible,
            "seeding a non-susceptible"
        );
        self.mark_infected(individual, params, rng);
    }

    /// Switches to the Markovian fast path, where recoveries are a rate
    /// `γ·I` channel. Requires exponential infectious periods.
    pub fn into_markovian(mut self, params: &EpidemicParams) -> Result<Self> {
        let gamma = params
            .period
            .exponential_rate()
            .ok_or_else(|| Error::InvalidParameter("the Markovian fast path needs exponential periods".into()))?;
        let mut position = vec![u32::MAX; self.status.len()];
        let infected: Vec<u32> = (0..self.status.len() as u32)
            .filter(|&i| self.status[i as usize] == Status::Infected)
            .collect();
        for (pos, &ind) in infected.iter().enumerate() {
            position[ind as usize] = pos as u32;
            self.recovery_at[ind as usize] = f64::NAN;
        }
        self.recoveries = Recoveries::Markovian {
            gamma,
            infected,
            position,
        };
        Ok(self)
    }

    pub fn graph(&self) -> &PopulationGraph {
        &self.graph
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn population(&self) -> usize {
        self.status.len()
    }

    pub fn susceptible(&self) -> u64 {
        self.susceptible
    }

    pub fn infected(&self) -> u64 {
        self.infected
    }

    pub fn recovered(&self) -> u64 {
        self.recovered
    }

    pub fn status(&self, individual: usize) -> Status {
        self.status[individual]
    }

    /// Cumulative transmissions through each channel (seeds excluded).
    pub fn cumulative(&self, channel: Channel) -> u64 {
        self.cumulative[channel.index()]
    }

    /// Layer aggregate `A_X = Σ_k s_k·i_k`.
    pub fn pair_aggregate(&self, layer: Layer) -> u64 {
        self.layers[layer_index(layer)].by_pairs.total()
    }

    /// Scheduled recovery time of an infected individual (scheduled mode).
    pub fn recovery_time(&self, individual: usize) -> Option<f64> {
        let t = self.recovery_at[individual];
        (self.status[individual] == Status::Infected && !t.is_nan()).then_some(t)
    }

    pub fn infection_time(&self, individual: usize) -> Option<f64> {
        let t = self.infected_at[individual];
        (!t.is_nan()).then_some(t)
    }

    /// Remaining infectious periods `recovery_time − t` of everyone
    /// currently infected. Empty on the Markovian fast path, which does not
    /// draw periods.
    pub fn remaining_periods(&self) -> Vec<f64> {
        match &self.recoveries {
            Recoveries::Scheduled(queue) => queue.iter().map(|Reverse(s)| s.time - self.t).collect(),
            Recoveries::Markovian { .. } => Vec::new(),
        }
    }

    pub fn infection_rates(&self, params: &EpidemicParams) -> InfectionRates {
        let k = self.population() as f64;
        InfectionRates {
            global: params.beta_g * self.susceptible as f64 * self.infected as f64 / k,
            household: params.lambda_h * self.pair_aggregate(Layer::Household) as f64,
            workplace: params.lambda_w * self.pair_aggregate(Layer::Workplace) as f64,
        }
    }

    /// Executes the next event if it happens no later than `horizon`.
    /// Otherwise the clock moves to `horizon` and nothing else changes; the
    /// discarded infection candidate is memoryless, so this is exact.
    pub fn advance<R: Rng + ?Sized>(&mut self, params: &EpidemicParams, rng: &mut R, horizon: f64) -> Step {
        if self.infected == 0 {
            return Step::Extinct;
        }
        let rates = self.infection_rates(params);
        let infection_rate = rates.total();
        let (time, recovery) = match &self.recoveries {
            Recoveries::Scheduled(queue) => {
                let Reverse(next) = *queue.peek().expect("infected individuals are scheduled");
                let candidate = self.t + exp_sample(infection_rate, rng);
                if next.time <= candidate {
                    (next.time, true)
                } else {
                    (candidate, false)
                }
            }
            Recoveries::Markovian { gamma, .. } => {
                let recovery_rate = gamma * self.infected as f64;
                let total = infection_rate + recovery_rate;
                let time = self.t + exp_sample(total, rng);
                let recovery = rng.random::<f64>() * total < recovery_rate;
                (time, recovery)
            }
        };
        if time > horizon {
            self.t = horizon.max(self.t);
            return Step::Horizon;
        }
        self.t = time;
        let event = if recovery {
            let individual = self.pop_recovery(rng);
            self.mark_recovered(individual);
            self.event(EventKind::Recovery, None, individual)
        } else {
            let channel = self.choose_channel(&rates, rng);
            let individual = self.choose_target(channel, rng);
            self.mark_infected(individual, params, rng);
            self.cumulative[channel.index()] += 1;
            self.event(EventKind::Infection, Some(channel), individual)
        };
        Step::Event(event)
    }

    /// Executes the next event, or returns `None` once extinct.
    pub fn step<R: Rng + ?Sized>(&mut self, params: &EpidemicParams, rng: &mut R) -> Option<Event> {
        match self.advance(params, rng, f64::INFINITY) {
            Step::Event(e) => Some(e),
            Step::Extinct => None,
            Step::Horizon => unreachable!("infinite horizon"),
        }
    }

    fn event(&self, kind: EventKind, layer: Option<Channel>, individual: usize) -> Event {
        Event {
            t: self.t,
            kind,
            layer,
            individual: individual as u32,
            household: self.graph.household_of(individual) as u32,
            workplace: self.graph.workplace_of(individual) as u32,
        }
    }

    fn choose_channel<R: Rng + ?Sized>(&self, rates: &InfectionRates, rng: &mut R) -> Channel {
        let u = rng.random::<f64>() * rates.total();
        let mut acc = 0.0;
        let mut last = None;
        for (channel, rate) in [
            (Channel::Global, rates.global),
            (Channel::Household, rates.household),
            (Channel::Workplace, rates.workplace),
        ] {
            if rate > 0.0 {
                acc += rate;
                last = Some(channel);
                if u < acc {
                    return channel;
                }
            }
        }
        last.expect("positive infection rate")
    }

    /// Picks the newly infected individual for an infection through
    /// `channel`.
    fn choose_target<R: Rng + ?Sized>(&self, channel: Channel, rng: &mut R) -> usize {
        let (layer, structure) = match channel {
            // Uniform susceptible: household proportional to its susceptible
            // count, then a uniform susceptible member.
            Channel::Global => {
                let l = &self.layers[0];
                (Layer::Household, l.by_susceptible.sample(rng).expect("S > 0"))
            }
            Channel::Household => {
                let l = &self.layers[0];
                (Layer::Household, l.by_pairs.sample(rng).expect("A_H > 0"))
            }
            Channel::Workplace => {
                let l = &self.layers[1];
                (Layer::Workplace, l.by_pairs.sample(rng).expect("A_W > 0"))
            }
        };
        let s = self.layers[layer_index(layer)].susceptible[structure];
        let mut pick = rng.random_range(0..s);
        for &m in self.graph.layer(layer).members(structure) {
            if self.status[m as usize] == Status::Susceptible {
                if pick == 0 {
                    return m as usize;
                }
                pick -= 1;
            }
        }
        unreachable!("cached susceptible count exceeds actual count")
    }

    fn mark_infected<R: Rng + ?Sized>(&mut self, individual: usize, params: &EpidemicParams, rng: &mut R) {
        self.status[individual] = Status::Infected;
        self.infected_at[individual] = self.t;
        self.susceptible -= 1;
        self.infected += 1;
        let h = self.graph.household_of(individual);
        let w = self.graph.workplace_of(individual);
        self.layers[0].on_infection(h);
        self.layers[1].on_infection(w);
        match &mut self.recoveries {
            Recoveries::Scheduled(queue) => {
                let time = self.t + params.period.sample(rng);
                self.recovery_at[individual] = time;
                queue.push(Reverse(Scheduled {
                    time,
                    seq: self.seq,
                    individual: individual as u32,
                }));
                self.seq += 1;
            }
            Recoveries::Markovian { infected, position, .. } => {
                position[individual] = infected.len() as u32;
                infected.push(individual as u32);
            }
        }
    }

    fn pop_recovery<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        match &mut self.recoveries {
            Recoveries::Scheduled(queue) => {
                let Reverse(next) = queue.pop().expect("non-empty queue");
                next.individual as usize
            }
            Recoveries::Markovian { infected, position, .. } => {
                let pos = rng.random_range(0..infected.len());
                let individual = infected.swap_remove(pos);
                if let Some(&moved) = infected.get(pos) {
                    position[moved as usize] = pos as u32;
                }
                position[individual as usize] = u32::MAX;
                individual as usize
            }
        }
    }

    fn mark_recovered(&mut self, individual: usize) {
        debug_assert_eq!(self.status[individual], Status::Infected);
        self.status[individual] = Status::Recovered;
        self.infected -= 1;
        self.recovered += 1;
        let h = self.graph.household_of(individual);
        let w = self.graph.workplace_of(individual);
        self.layers[0].on_recovery(h);
        self.layers[1].on_recovery(w);
    }

    /// Counts of structures per `(S, I)` composition in both layers.
    pub fn type_histogram(&self) -> TypeHistogram {
        let mut counts: [BTreeMap<(usize, usize), f64>; 2] = Default::default();
        for (x, layer) in self.layers.iter().enumerate() {
            for (s, i) in layer.susceptible.iter().zip(&layer.infected) {
                *counts[x].entry((*s as usize, *i as usize)).or_insert(0.0) += 1.0;
            }
        }
        TypeHistogram {
            population: self.population() as f64,
            structures: [
                self.layers[0].susceptible.len() as f64,
                self.layers[1].susceptible.len() as f64,
            ],
            susceptible: self.susceptible as f64,
            infected: self.infected as f64,
            counts,
        }
    }

    /// Recomputes every cached aggregate from the individual statuses and
    /// reports each mismatch. All comparisons are exact integer equalities.
    pub fn check_consistency(&self) -> ConsistencyReport {
        let mut diffs = Vec::new();
        let k = self.population() as u64;
        let count = |st: Status| self.status.iter().filter(|&&s| s == st).count() as u64;
        let (s, i, r) = (
            count(Status::Susceptible),
            count(Status::Infected),
            count(Status::Recovered),
        );
        for (name, cached, actual) in [
            ("S_total", self.susceptible, s),
            ("I_total", self.infected, i),
            ("R_total", self.recovered, r),
        ] {
            if cached != actual {
                diffs.push(format!("{name}: cached {cached}, recomputed {actual}"));
            }
        }
        if self.susceptible + self.infected + self.recovered != k {
            diffs.push(format!(
                "S + I + R = {} != K = {k}",
                self.susceptible + self.infected + self.recovered
            ));
        }
        for layer in Layer::BOTH {
            let part = self.graph.layer(layer);
            let counts = &self.layers[layer_index(layer)];
            let (mut sum_s, mut sum_i, mut sum_pairs) = (0u64, 0u64, 0u64);
            for id in 0..part.len() {
                let mut ss = 0u32;
                let mut ii = 0u32;
                for &m in part.members(id) {
                    match self.status[m as usize] {
                        Status::Susceptible => ss += 1,
                        Status::Infected => ii += 1,
                        Status::Recovered => {}
                    }
                }
                if counts.susceptible[id] != ss || counts.infected[id] != ii {
                    diffs.push(format!(
                        "{} structure {id}: cached (s, i) = ({}, {}), recomputed ({ss}, {ii})",
                        layer.tag(),
                        counts.susceptible[id],
                        counts.infected[id]
                    ));
                }
                if counts.by_susceptible.weight(id) != ss as u64 || counts.by_pairs.weight(id) != ss as u64 * ii as u64
                {
                    diffs.push(format!("{} structure {id}: sampler weights stale", layer.tag()));
                }
                sum_s += ss as u64;
                sum_i += ii as u64;
                sum_pairs += ss as u64 * ii as u64;
            }
            if sum_s != s {
                diffs.push(format!("{} layer susceptible sum {sum_s} != S_total {s}", layer.tag()));
            }
            if sum_i != i {
                diffs.push(format!("{} layer infected sum {sum_i} != I_total {i}", layer.tag()));
            }
            if counts.by_pairs.total() != sum_pairs {
                diffs.push(format!(
                    "A_{}: cached {}, recomputed {sum_pairs}",
                    layer.tag(),
                    counts.by_pairs.total()
                ));
            }
            if counts.by_susceptible.total() != sum_s {
                diffs.push(format!(
                    "{} susceptible sampler total {} != {sum_s}",
                    layer.tag(),
                    counts.by_susceptible.total()
                ));
            }
        }
        match &self.recoveries {
            Recoveries::Scheduled(queue) => {
                if queue.len() as u64 != i {
                    diffs.push(format!("recovery queue holds {} entries for I = {i}", queue.len()));
                }
            }
            Recoveries::Markovian { infected, .. } => {
                if infected.len() as u64 != i {
                    diffs.push(format!("infected list holds {} entries for I = {i}", infected.len()));
                }
            }
        }
        ConsistencyReport { diffs }
    }
}

fn exp_sample<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    if rate > 0.0 {
        Exp::new(rate).expect("positive rate").sample(rng)
    } else {
        f64::INFINITY
    }
}

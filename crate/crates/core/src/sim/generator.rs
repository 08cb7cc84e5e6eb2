//! Event generators: seeded, reproducible sources of ω(t).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::EventVector;

const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// One atom of a discrete joint distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportPoint {
    pub event: EventVector,
    pub probability: f64,
}

impl SupportPoint {
    pub fn new(event: impl Into<EventVector>, probability: f64) -> Self {
        SupportPoint {
            event: event.into(),
            probability,
        }
    }
}

/// One atom of a discrete distribution over a single coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuePoint {
    pub value: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    /// Rounds spent in this segment before moving on.
    pub duration: u64,
    pub generator: EventGenerator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventGenerator {
    /// i.i.d. draws from a finite joint distribution.
    Iid { support: Vec<SupportPoint> },
    /// i.i.d. draws with independent coordinates.
    IidProduct { coordinates: Vec<Vec<ValuePoint>> },
    /// Finite-state Markov chain; the event is the current state's vector.
    Markov {
        states: Vec<EventVector>,
        /// Row-stochastic transition matrix.
        transition: Vec<Vec<f64>>,
        /// Index of the state at round 0.
        initial: usize,
    },
    /// Runs each segment for its duration, cycling back to the first after
    /// the last. Nested generators keep their own state between visits.
    Piecewise { segments: Vec<Segment> },
    /// Replays a fixed list, cycling.
    Scripted { events: Vec<EventVector> },
}

fn check_distribution(probs: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    let mut total = 0.0;
    let mut count = 0usize;
    for p in probs {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::invalid(format!("{what}: probability {p} is not in [0, 1]")));
        }
        total += p;
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid(format!("{what}: empty distribution")));
    }
    if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(Error::invalid(format!("{what}: probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn check_event(event: &EventVector, dim: usize, what: &str) -> Result<()> {
    if event.len() != dim {
        return Err(Error::invalid(format!(
            "{what}: event has {} coordinates, expected {dim}",
            event.len()
        )));
    }
    if event.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid(format!("{what}: event has a non-finite coordinate")));
    }
    Ok(())
}

/// Index drawn from a distribution given as weights summing to one; rounding
/// leftovers go to the last atom.
fn draw_index(rng: &mut ChaCha8Rng, probs: impl Iterator<Item = f64>) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, p) in probs.enumerate() {
        acc += p;
        last = k;
        if r < acc {
            return k;
        }
    }
    last
}

impl EventGenerator {
    /// Checks the generator produces `event_dim`-vectors from valid
    /// distributions.
    pub fn validate(&self, event_dim: usize) -> Result<()> {
        match self {
            EventGenerator::Iid { support } => {
                for p in support {
                    check_event(&p.event, event_dim, "iid support")?;
                }
                check_distribution(support.iter().map(|p| p.probability), "iid support")
            }
            EventGenerator::IidProduct { coordinates } => {
                if coordinates.len() != event_dim {
                    return Err(Error::invalid(format!(
                        "iid_product has {} coordinates, expected {event_dim}",
                        coordinates.len()
                    )));
                }
                for (j, c) in coordinates.iter().enumerate() {
                    let what = format!("iid_product coordinate {}", j + 1);
                    if c.iter().any(|v| !v.value.is_finite()) {
                        return Err(Error::invalid(format!("{what}: non-finite value")));
                    }
                    check_distribution(c.iter().map(|v| v.probability), &what)?;
                }
                Ok(())
            }
            EventGenerator::Markov {
                states,
                transition,
                initial,
            } => {
                if states.is_empty() {
                    return Err(Error::invalid("markov: no states"));
                }
                for s in states {
                    check_event(s, event_dim, "markov state")?;
                }
                if *initial >= states.len() {
                    return Err(Error::invalid(format!("markov: initial state {initial} out of range")));
                }
                if transition.len() != states.len() {
                    return Err(Error::invalid("markov: transition matrix must be square"));
                }
                for (k, row) in transition.iter().enumerate() {
                    if row.len() != states.len() {
                        return Err(Error::invalid("markov: transition matrix must be square"));
                    }
                    check_distribution(row.iter().copied(), &format!("markov row {k}"))?;
                }
                Ok(())
            }
            EventGenerator::Piecewise { segments } => {
                if segments.is_empty() {
                    return Err(Error::invalid("piecewise: no segments"));
                }
                for s in segments {
                    if s.duration == 0 {
                        return Err(Error::invalid("piecewise: segment duration must be positive"));
                    }
                    s.generator.validate(event_dim)?;
                }
                Ok(())
            }
            EventGenerator::Scripted { events } => {
                if events.is_empty() {
                    return Err(Error::invalid("scripted: no events"));
                }
                for e in events {
                    check_event(e, event_dim, "scripted")?;
                }
                Ok(())
            }
        }
    }

    /// Every event vector the generator can emit, without duplicates removed.
    /// Product supports larger than `limit` are refused.
    pub fn support_events(&self, limit: u64) -> Result<Vec<EventVector>> {
        let mut out = Vec::new();
        self.collect_support(limit, &mut out)?;
        Ok(out)
    }

    fn collect_support(&self, limit: u64, out: &mut Vec<EventVector>) -> Result<()> {
        match self {
            EventGenerator::Iid { support } => {
                out.extend(support.iter().map(|p| p.event.clone()));
            }
            EventGenerator::IidProduct { .. } => {
                out.extend(self.joint_support(limit)?.unwrap_or_default().into_iter().map(|p| p.event));
            }
            EventGenerator::Markov { states, .. } => out.extend(states.iter().cloned()),
            EventGenerator::Piecewise { segments } => {
                for s in segments {
                    s.generator.collect_support(limit, out)?;
                }
            }
            EventGenerator::Scripted { events } => out.extend(events.iter().cloned()),
        }
        Ok(())
    }

    /// The joint distribution of a stationary i.i.d. generator, `None` for
    /// the other kinds.
    pub fn joint_support(&self, limit: u64) -> Result<Option<Vec<SupportPoint>>> {
        match self {
            EventGenerator::Iid { support } => Ok(Some(support.clone())),
            EventGenerator::IidProduct { coordinates } => {
                let count = coordinates
                    .iter()
                    .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
                    .unwrap_or(u128::MAX);
                if count > u128::from(limit) {
                    return Err(Error::TooLarge { count, limit });
                }
                let mut points = vec![SupportPoint::new(Vec::new(), 1.0)];
                for c in coordinates {
                    points = points
                        .into_iter()
                        .flat_map(|p| {
                            c.iter().map(move |v| {
                                let mut e = p.event.0.clone();
                                e.push(v.value);
                                SupportPoint::new(e, p.probability * v.probability)
                            })
                        })
                        .collect();
                }
                Ok(Some(points))
            }
            _ => Ok(None),
        }
    }

    /// A fresh sampler for this generator.
    pub fn source(&self, rng: ChaCha8Rng) -> EventSource {
        EventSource {
            node: Node::new(self),
            rng,
        }
    }

    /// A sampler seeded with `seed` on the event stream.
    pub fn seeded_source(&self, seed: u64) -> EventSource {
        self.source(event_rng(seed))
    }
}

/// The event generator's random stream for a given seed.
pub fn event_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

#[derive(Clone, Debug)]
enum Node {
    Iid(Vec<SupportPoint>),
    Product(Vec<Vec<ValuePoint>>),
    Markov {
        states: Vec<EventVector>,
        transition: Vec<Vec<f64>>,
        current: usize,
        started: bool,
    },
    Piecewise {
        segments: Vec<(u64, Node)>,
        index: usize,
        used: u64,
    },
    Scripted { events: Vec<EventVector>, next: usize },
}

impl Node {
    fn new(g: &EventGenerator) -> Self {
        match g {
            EventGenerator::Iid { support } => Node::Iid(support.clone()),
            EventGenerator::IidProduct { coordinates } => Node::Product(coordinates.clone()),
            EventGenerator::Markov {
                states,
                transition,
                initial,
            } => Node::Markov {
                states: states.clone(),
                transition: transition.clone(),
                current: *initial,
                started: false,
            },
            EventGenerator::Piecewise { segments } => Node::Piecewise {
                segments: segments
                    .iter()
                    .map(|s| (s.duration, Node::new(&s.generator)))
                    .collect(),
                index: 0,
                used: 0,
            },
            EventGenerator::Scripted { events } => Node::Scripted {
                events: events.clone(),
                next: 0,
            },
        }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> EventVector {
        match self {
            Node::Iid(support) => {
                let k = draw_index(rng, support.iter().map(|p| p.probability));
                support[k].event.clone()
            }
            Node::Product(coords) => EventVector(
                coords
                    .iter()
                    .map(|c| c[draw_index(rng, c.iter().map(|v| v.probability))].value)
                    .collect(),
            ),
            Node::Markov {
                states,
                transition,
                current,
                started,
            } => {
                if *started {
                    *current = draw_index(rng, transition[*current].iter().copied());
                }
                *started = true;
                states[*current].clone()
            }
            Node::Piecewise {
                segments,
                index,
                used,
            } => {
                if *used == segments[*index].0 {
                    *index = (*index + 1) % segments.len();
                    *used = 0;
                }
                *used += 1;
                segments[*index].1.draw(rng)
            }
            Node::Scripted { events, next } => {
                let e = events[*next].clone();
                *next = (*next + 1) % events.len();
                e
            }
        }
    }
}

/// Stateful sampler; one call to [`EventSource::next_event`] per round.
#[derive(Clone, Debug)]
pub struct EventSource {
    node: Node,
    rng: ChaCha8Rng,
}

impl EventSource {
    pub fn next_event(&mut self) -> EventVector {
        self.node.draw(&mut self.rng)
    }
}

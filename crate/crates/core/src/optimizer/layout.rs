//! Scheme-independent view of a transmission as a set of message streams.
//!
//! Every scheme is described by its streams: the precoder column carrying
//! it, the users that must decode it (with the streams still interfering at
//! that point of their SIC chain) and the weight its rate earns in the
//! weighted sum rate once the common rate is allocated optimally. The
//! weighted sum rate is then `sum_s weight_s * min_{d in decoders_s} r_{d,s}`.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::rates::{stream_rate, Scheme};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub user: usize,
    /// Columns treated as noise when this user decodes the stream.
    pub interference: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream<T> {
    pub column: usize,
    pub weight: T,
    pub decoders: Vec<Decoder>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamLayout<T> {
    pub streams: Vec<Stream<T>>,
    pub columns: usize,
    pub users: usize,
}

fn max_weight<T: Real>(weights: &[T], users: impl Iterator<Item = usize>) -> T {
    users.fold(T::zero(), |m, k| m.max(weights[k]))
}

impl<T: Real> StreamLayout<T> {
    pub fn new(scheme: &Scheme, weights: &[T]) -> Result<Self> {
        let k_users = weights.len();
        scheme.check(k_users)?;
        let columns = scheme.streams(k_users);
        let all = 0..k_users;
        let mut streams = Vec::new();
        match scheme {
            Scheme::Rs1Layer => {
                let privates: Vec<usize> = (1..=k_users).collect();
                streams.push(Stream {
                    column: 0,
                    weight: max_weight(weights, all.clone()),
                    decoders: all
                        .clone()
                        .map(|k| Decoder {
                            user: k,
                            interference: privates.clone(),
                        })
                        .collect(),
                });
                for k in all {
                    streams.push(Stream {
                        column: 1 + k,
                        weight: weights[k],
                        decoders: vec![Decoder {
                            user: k,
                            interference: privates.iter().copied().filter(|&j| j != 1 + k).collect(),
                        }],
                    });
                }
            }
            Scheme::Hrs2Layer { groups } => {
                let n_groups = groups.len();
                let inner: Vec<usize> = (1..=n_groups).collect();
                let first_private = 1 + n_groups;
                let privates: Vec<usize> = (first_private..first_private + k_users).collect();
                let group_of = scheme.group_of(k_users);
                let inner_except =
                    |g: usize| inner.iter().copied().filter(move |&c| c != 1 + g);
                streams.push(Stream {
                    column: 0,
                    weight: max_weight(weights, all.clone()),
                    decoders: all
                        .clone()
                        .map(|k| Decoder {
                            user: k,
                            interference: inner.iter().chain(&privates).copied().collect(),
                        })
                        .collect(),
                });
                for (g, members) in groups.iter().enumerate() {
                    streams.push(Stream {
                        column: 1 + g,
                        weight: max_weight(weights, members.iter().copied()),
                        decoders: members
                            .iter()
                            .map(|&k| Decoder {
                                user: k,
                                interference: inner_except(g).chain(privates.iter().copied()).collect(),
                            })
                            .collect(),
                    });
                }
                for k in all {
                    streams.push(Stream {
                        column: first_private + k,
                        weight: weights[k],
                        decoders: vec![Decoder {
                            user: k,
                            interference: inner_except(group_of[k])
                                .chain(privates.iter().copied().filter(|&j| j != first_private + k))
                                .collect(),
                        }],
                    });
                }
            }
            Scheme::Sdma => {
                for k in all.clone() {
                    streams.push(Stream {
                        column: k,
                        weight: weights[k],
                        decoders: vec![Decoder {
                            user: k,
                            interference: all.clone().filter(|&j| j != k).collect(),
                        }],
                    });
                }
            }
            Scheme::Noma { order } => {
                let [w, s] = *order;
                streams.push(Stream {
                    column: w,
                    weight: weights[w],
                    decoders: vec![
                        Decoder {
                            user: w,
                            interference: vec![s],
                        },
                        Decoder {
                            user: s,
                            interference: vec![s],
                        },
                    ],
                });
                streams.push(Stream {
                    column: s,
                    weight: weights[s],
                    decoders: vec![Decoder {
                        user: s,
                        interference: vec![],
                    }],
                });
            }
        }
        Ok(StreamLayout {
            streams,
            columns,
            users: k_users,
        })
    }

    /// Weighted sum rate in bit/s/Hz from received powers `q[(k, j)]`.
    pub fn wsr(&self, q: &DMatrix<T>, noise: T) -> T {
        self.streams.iter().fold(T::zero(), |acc, s| {
            if s.weight == T::zero() {
                return acc;
            }
            let rate = s
                .decoders
                .iter()
                .map(|d| {
                    let interf = d.interference.iter().fold(T::zero(), |a, &j| a + q[(d.user, j)]);
                    stream_rate(q[(d.user, s.column)], interf, noise)
                })
                .fold(T::max_value().unwrap(), |a, b| a.min(b));
            acc + s.weight * rate
        })
    }
}

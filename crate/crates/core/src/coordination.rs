//! A stripe as a chain of AP agents that only talk through messages.
//!
//! Agent `i` waits for the side information of agent `i - 1`, designs its
//! own combiner and quantizer and forwards its side information to agent
//! `i + 1`; the last agent delivers to the processor. Each hop costs one
//! time unit.

use std::sync::mpsc::{channel, Receiver, Sender};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::HybridMode;
use crate::inp::{
    process_ap, ApInpResult, ApObservation, ApOptions, Scheme, SideInfo, StripeOutcome,
};
use crate::linalg::CMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// 1-based stripe and position.
    Ap {
        stripe: usize,
        index: usize,
    },
    Processor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    SideInfo,
    CompressedSignal,
}

#[derive(Clone, Debug, Serialize)]
pub struct Message {
    pub from: Node,
    pub to: Node,
    pub kind: PayloadKind,
    pub payload_reals: usize,
    pub timestamp: u64,
    #[serde(skip)]
    side_info: Option<SideInfo>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StripeTrace {
    pub messages: Vec<Message>,
    pub hops: usize,
    pub overhead_reals_total: usize,
}

impl StripeTrace {
    pub fn count(&self, kind: PayloadKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }
}

/// One AP agent. It owns its local CSI and nothing else.
struct ApAgent {
    id: Node,
    next: Node,
    observation: ApObservation,
    inbox: Receiver<Message>,
    outbox: Sender<Message>,
}

impl ApAgent {
    fn step(
        &self,
        clock: u64,
        sigma_x: &CMatrix,
        c_f: f64,
        scheme: Scheme,
        options: ApOptions<'_>,
    ) -> Result<(ApInpResult, Message)> {
        let incoming = self.inbox.try_recv().ok();
        if let Some(msg) = &incoming {
            if msg.timestamp >= clock {
                return Err(Error::Numerical("message from the future".into()));
            }
        }
        let prev = incoming.as_ref().and_then(|m| m.side_info.as_ref());
        let result = process_ap(&self.observation, prev, sigma_x, c_f, scheme, options)?;
        let si = result.side_info_out.clone();
        let msg = Message {
            from: self.id,
            to: self.next,
            kind: PayloadKind::SideInfo,
            payload_reals: si.overhead_reals(),
            timestamp: clock,
            side_info: Some(si),
        };
        self.outbox
            .send(msg.clone())
            .map_err(|_| Error::Numerical("successor hung up".into()))?;
        Ok((result, msg))
    }
}

/// Runs the design protocol over stripe `stripe` (1-based) followed by one
/// channel use of data, in which each AP forwards its K compressed
/// samples. Design results equal [`crate::inp::run_stripe`] exactly.
pub fn run_protocol(
    stripe: usize,
    aps: &[ApObservation],
    sigma_x: &CMatrix,
    c_f: f64,
) -> Result<(StripeOutcome, StripeTrace)> {
    run_protocol_with(
        stripe,
        aps,
        sigma_x,
        c_f,
        Scheme::MMSE_OPT,
        HybridMode::Off,
        None,
    )
}

pub fn run_protocol_with(
    stripe: usize,
    aps: &[ApObservation],
    sigma_x: &CMatrix,
    c_f: f64,
    scheme: Scheme,
    hybrid: HybridMode,
    analog: Option<&[CMatrix]>,
) -> Result<(StripeOutcome, StripeTrace)> {
    let l = aps.len();
    if l == 0 {
        return Err(Error::Domain("a stripe needs at least one AP".into()));
    }
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..=l).map(|_| channel::<Message>()).unzip();
    let mut receivers = receivers.into_iter();
    let agents: Vec<ApAgent> = aps
        .iter()
        .enumerate()
        .map(|(i, obs)| ApAgent {
            id: Node::Ap {
                stripe,
                index: i + 1,
            },
            next: if i + 1 < l {
                Node::Ap {
                    stripe,
                    index: i + 2,
                }
            } else {
                Node::Processor
            },
            observation: obs.clone(),
            inbox: receivers.next().expect("one inbox per agent"),
            outbox: senders[i + 1].clone(),
        })
        .collect();
    let processor_inbox = receivers.next().expect("processor inbox");

    let mut trace = StripeTrace::default();
    let mut results = Vec::with_capacity(l);
    for (i, agent) in agents.iter().enumerate() {
        let options = ApOptions {
            hybrid,
            analog: analog.and_then(|a| a.get(i)),
        };
        let clock = (i + 1) as u64;
        let (res, msg) = agent
            .step(clock, sigma_x, c_f, scheme, options)
            .map_err(|e| e.at_ap(stripe, i + 1))?;
        trace.overhead_reals_total += msg.payload_reals;
        trace.messages.push(msg);
        results.push(res);
    }
    let final_side_info = processor_inbox
        .try_recv()
        .ok()
        .and_then(|m| m.side_info)
        .ok_or_else(|| Error::Numerical("processor received no side information".into()))?;

    let k = sigma_x.nrows();
    for (i, agent) in agents.iter().enumerate() {
        trace.messages.push(Message {
            from: agent.id,
            to: agent.next,
            kind: PayloadKind::CompressedSignal,
            payload_reals: 2 * k,
            timestamp: (l + i + 1) as u64,
            side_info: None,
        });
    }
    trace.hops = l;

    Ok((
        StripeOutcome {
            aps: results,
            final_side_info,
        },
        trace,
    ))
}

/// Signaling overhead of one scheme across a network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OverheadRow {
    pub scheme: String,
    pub links: usize,
    /// Reals the combiner needs per link; zero for MRC.
    pub combining_si_per_link: usize,
    /// Reals sent per link.
    pub si_per_link: usize,
    pub total: usize,
}

/// Summarizes traces recorded with `scheme`.
pub fn overhead_report(scheme: Scheme, traces: &[StripeTrace], ues: usize) -> OverheadRow {
    let links: usize = traces.iter().map(|t| t.count(PayloadKind::SideInfo)).sum();
    let split = crate::eval::side_info_overhead(scheme, ues);
    OverheadRow {
        scheme: scheme.label().to_string(),
        links,
        combining_si_per_link: split.combining,
        si_per_link: split.per_link,
        total: traces.iter().map(|t| t.overhead_reals_total).sum(),
    }
}

use serde::{Deserialize, Serialize};

use super::network::{Heading, SignalTiming};

/// Fixed four-phase cycle. Transitions only ever go to [`Phase::next`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    NsGreen,
    NsYellow,
    EwGreen,
    EwYellow,
}

impl Phase {
    pub fn index(self) -> usize {
        match self {
            Phase::NsGreen => 0,
            Phase::NsYellow => 1,
            Phase::EwGreen => 2,
            Phase::EwYellow => 3,
        }
    }

    pub fn next(self) -> Phase {
        match self {
            Phase::NsGreen => Phase::NsYellow,
            Phase::NsYellow => Phase::EwGreen,
            Phase::EwGreen => Phase::EwYellow,
            Phase::EwYellow => Phase::NsGreen,
        }
    }

    pub fn is_green(self) -> bool {
        matches!(self, Phase::NsGreen | Phase::EwGreen)
    }

    pub fn light_for(self, heading: Heading) -> Light {
        let vertical = heading.is_vertical();
        match (self, vertical) {
            (Phase::NsGreen, true) | (Phase::EwGreen, false) => Light::Green,
            (Phase::NsYellow, true) | (Phase::EwYellow, false) => Light::Yellow,
            _ => Light::Red,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Light {
    Green,
    Yellow,
    Red,
}

/// Signal controller state of one intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalState {
    pub phase: Phase,
    /// Seconds spent in the current phase.
    pub time_in_phase: f64,
    pub min_green: f64,
    pub max_green: f64,
    pub yellow_duration: f64,
}

/// A completed phase, reported when the controller leaves it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseChange {
    pub intersection: usize,
    pub from: Phase,
    pub duration: f64,
    pub forced: bool,
}

impl SignalState {
    pub fn new(timing: &SignalTiming) -> Self {
        Self {
            phase: Phase::NsGreen,
            time_in_phase: 0.0,
            min_green: timing.min_green,
            max_green: timing.max_green,
            yellow_duration: timing.yellow,
        }
    }

    /// Apply one control decision at the start of a step.
    ///
    /// `switch` is only honoured during green once `min_green` has elapsed.
    /// Yellow ends by itself after `yellow_duration`, and green is cut at
    /// `max_green`. Returns the phase that just ended, if any.
    pub fn apply(&mut self, switch: bool) -> Option<(Phase, f64, bool)> {
        const EPS: f64 = 1e-9;
        let t = self.time_in_phase;
        let (advance, forced) = if self.phase.is_green() {
            if t + EPS >= self.max_green {
                (true, !switch || t + EPS < self.min_green)
            } else {
                (switch && t + EPS >= self.min_green, false)
            }
        } else {
            (t + EPS >= self.yellow_duration, false)
        };
        if advance {
            let ended = self.phase;
            self.phase = self.phase.next();
            self.time_in_phase = 0.0;
            Some((ended, t, forced))
        } else {
            None
        }
    }

    pub fn tick(&mut self, dt: f64) {
        self.time_in_phase += dt;
    }
}

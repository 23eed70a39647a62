//! Non-learning baseline signal controllers.

use serde::{Deserialize, Serialize};

use crate::sim::SimState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineController {
    /// Switch once green has lasted `green` seconds.
    Fixed { green: f64 },
    /// Hold green while a vehicle crossed within the last `gap` seconds.
    Actuated { gap: f64 },
}

impl BaselineController {
    pub fn actions(&self, state: &SimState) -> Vec<u8> {
        match *self {
            BaselineController::Fixed { green } => fixed_time_controller(state, green),
            BaselineController::Actuated { gap } => actuated_controller(state, gap),
        }
    }
}

pub fn fixed_time_controller(state: &SimState, green: f64) -> Vec<u8> {
    state
        .signals()
        .iter()
        .map(|s| u8::from(s.phase.is_green() && s.time_in_phase + 1e-9 >= green))
        .collect()
}

pub fn actuated_controller(state: &SimState, gap: f64) -> Vec<u8> {
    state
        .signals()
        .iter()
        .enumerate()
        .map(|(i, s)| u8::from(s.phase.is_green() && state.gap_since_activity(i) + 1e-9 >= gap))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Heading, NetworkSpec, Phase};

    fn single() -> SimState {
        SimState::build(&NetworkSpec::uniform(1, 1)).unwrap()
    }

    #[test]
    fn fixed_switches_at_42() {
        let mut s = single();
        for _ in 0..41 {
            s.step(&[0]).unwrap();
        }
        assert_eq!(fixed_time_controller(&s, 42.0), [0]);
        s.step(&[0]).unwrap();
        assert_eq!(fixed_time_controller(&s, 42.0), [1]);
    }

    #[test]
    fn fixed_green_lasts_exactly_42() {
        let mut s = single();
        let mut greens = Vec::new();
        for _ in 0..1000 {
            let a = fixed_time_controller(&s, 42.0);
            for c in s.step(&a).unwrap().phase_changes {
                if c.from.is_green() {
                    greens.push(c.duration);
                }
            }
        }
        assert!(greens.len() > 10);
        assert!(greens.iter().all(|d| *d == 42.0), "{greens:?}");
    }

    #[test]
    fn actuated_gaps_out_on_empty_approach() {
        let mut s = single();
        let mut first = None;
        for _ in 0..20 {
            let a = actuated_controller(&s, 3.0);
            if let Some(c) = s.step(&a).unwrap().phase_changes.first() {
                first = Some(c.duration);
                break;
            }
        }
        assert_eq!(first, Some(4.0));
        assert_eq!(s.signal(0).unwrap().phase, Phase::NsYellow);
    }

    #[test]
    fn actuated_holds_for_a_platoon() {
        let mut s = single();
        let net = s.network_arc();
        let entry = net.intersections[0].inbound.iter().copied().find(|l| net.links[*l].heading == Heading::South).unwrap();
        for k in 0..5 {
            s.place_vehicle(entry, 0, 99.0 - 7.5 * k as f64, 0.0).unwrap();
        }
        let mut green = None;
        for _ in 0..60 {
            let a = actuated_controller(&s, 3.0);
            if let Some(c) = s.step(&a).unwrap().phase_changes.first() {
                green = Some(c.duration);
                break;
            }
        }
        // 5 vehicles at 0.5 veh/s take about 10 s to clear, then the gap runs out
        let g = green.unwrap();
        assert!((10.0..=15.0).contains(&g), "{g}");
    }
}

//! Per-thread floating-point operation counters.
//!
//! Every routine in [`crate::linalg`] charges its operation count to the
//! phase that is active on the calling thread. Optimizers switch phases with
//! [`enter`] so a run can be broken down into factor computation,
//! preconditioning and weight update.

use serde::Serialize;
use std::cell::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Forward/backward passes and anything not attributed to an optimizer.
    Other,
    Factor,
    Precondition,
    Update,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Other, Phase::Factor, Phase::Precondition, Phase::Update];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Other => "other",
            Phase::Factor => "factor",
            Phase::Precondition => "precondition",
            Phase::Update => "update",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlopCounts {
    pub other: u64,
    pub factor: u64,
    pub precondition: u64,
    pub update: u64,
}

impl FlopCounts {
    pub fn get(&self, phase: Phase) -> u64 {
        match phase {
            Phase::Other => self.other,
            Phase::Factor => self.factor,
            Phase::Precondition => self.precondition,
            Phase::Update => self.update,
        }
    }

    pub fn total(&self) -> u64 {
        self.other + self.factor + self.precondition + self.update
    }

    /// Component-wise `self - earlier`.
    pub fn since(&self, earlier: &FlopCounts) -> FlopCounts {
        FlopCounts {
            other: self.other - earlier.other,
            factor: self.factor - earlier.factor,
            precondition: self.precondition - earlier.precondition,
            update: self.update - earlier.update,
        }
    }
}

impl std::ops::AddAssign for FlopCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.other += rhs.other;
        self.factor += rhs.factor;
        self.precondition += rhs.precondition;
        self.update += rhs.update;
    }
}

thread_local! {
    static ACTIVE: Cell<Phase> = const { Cell::new(Phase::Other) };
    static COUNTS: Cell<[u64; 4]> = const { Cell::new([0; 4]) };
}

/// Charge `n` operations to the active phase.
#[inline]
pub fn add(n: u64) {
    let phase = ACTIVE.with(|p| p.get());
    COUNTS.with(|c| {
        let mut counts = c.get();
        counts[phase.index()] += n;
        c.set(counts);
    });
}

pub fn active() -> Phase {
    ACTIVE.with(|p| p.get())
}

/// Restores the previous phase when dropped.
pub struct PhaseGuard {
    previous: Phase,
}

impl Drop for PhaseGuard {
    fn drop(&mut self) {
        ACTIVE.with(|p| p.set(self.previous));
    }
}

#[must_use = "the phase is reset as soon as the guard is dropped"]
pub fn enter(phase: Phase) -> PhaseGuard {
    let previous = ACTIVE.with(|p| p.replace(phase));
    PhaseGuard { previous }
}

pub fn snapshot() -> FlopCounts {
    let c = COUNTS.with(|c| c.get());
    FlopCounts {
        other: c[0],
        factor: c[1],
        precondition: c[2],
        update: c[3],
    }
}

pub fn reset() {
    COUNTS.with(|c| c.set([0; 4]));
}

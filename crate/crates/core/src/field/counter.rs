//! Ambient field-operation counters.
//!
//! Every arithmetic operation on a [`Fe`](super::Fe) increments the counter of
//! the *active scope* on the current thread. The simulator switches the scope
//! explicitly whenever it runs code on behalf of a node, so per-node
//! complexities (and the throughput metric derived from them) fall out of
//! plain arithmetic without threading a counter through every call.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Who performed the work.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Unscoped,
    /// One-time precomputation (coefficient matrices, subproduct trees).
    Setup,
    Node(usize),
    Client(usize),
}

/// Which part of the execution phase the work belongs to: encoding and
/// processing commands, decoding, or updating stored state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Rho,
    Psi,
    Chi,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scope {
    pub role: Role,
    pub phase: Phase,
}

impl Scope {
    pub const UNSCOPED: Scope = Scope { role: Role::Unscoped, phase: Phase::Other };
    pub const SETUP: Scope = Scope { role: Role::Setup, phase: Phase::Other };

    pub fn node(id: usize, phase: Phase) -> Self {
        Scope { role: Role::Node(id), phase }
    }

    pub fn client(id: usize) -> Self {
        Scope { role: Role::Client(id), phase: Phase::Other }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub adds: u64,
    pub muls: u64,
    pub invs: u64,
    /// Equality tests performed by protocol logic. Not field arithmetic, so
    /// excluded from [`OpCounts::field_ops`].
    pub cmps: u64,
}

impl OpCounts {
    /// Additions, multiplications and inversions.
    pub fn field_ops(&self) -> u64 {
        self.adds + self.muls + self.invs
    }

    pub fn with_comparisons(&self) -> u64 {
        self.field_ops() + self.cmps
    }
}

impl Add for OpCounts {
    type Output = OpCounts;
    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            adds: self.adds + o.adds,
            muls: self.muls + o.muls,
            invs: self.invs + o.invs,
            cmps: self.cmps + o.cmps,
        }
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: OpCounts) {
        *self = *self + o;
    }
}

impl Sub for OpCounts {
    type Output = OpCounts;
    fn sub(self, o: OpCounts) -> OpCounts {
        OpCounts {
            adds: self.adds - o.adds,
            muls: self.muls - o.muls,
            invs: self.invs - o.invs,
            cmps: self.cmps - o.cmps,
        }
    }
}

impl std::iter::Sum for OpCounts {
    fn sum<I: Iterator<Item = OpCounts>>(iter: I) -> Self {
        iter.fold(OpCounts::default(), |a, b| a + b)
    }
}

thread_local! {
    static CURRENT: Cell<Scope> = const { Cell::new(Scope::UNSCOPED) };
    static LIVE: Cell<OpCounts> = const { Cell::new(OpCounts { adds: 0, muls: 0, invs: 0, cmps: 0 }) };
    static FLUSHED: Cell<OpCounts> = const { Cell::new(OpCounts { adds: 0, muls: 0, invs: 0, cmps: 0 }) };
    static TALLY: RefCell<BTreeMap<Scope, OpCounts>> = const { RefCell::new(BTreeMap::new()) };
}

#[inline]
fn bump(f: impl FnOnce(&mut OpCounts)) {
    LIVE.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

#[inline]
pub(crate) fn record_add() {
    bump(|c| c.adds += 1);
}

#[inline]
pub(crate) fn record_mul() {
    bump(|c| c.muls += 1);
}

#[inline]
pub(crate) fn record_inv() {
    bump(|c| c.invs += 1);
}

/// Record `n` protocol-level comparisons in the active scope.
pub fn record_comparisons(n: u64) {
    bump(|c| c.cmps += n);
}

fn flush() {
    let live = LIVE.with(|c| c.replace(OpCounts::default()));
    if live == OpCounts::default() {
        return;
    }
    let scope = CURRENT.with(|c| c.get());
    TALLY.with(|t| *t.borrow_mut().entry(scope).or_default() += live);
    FLUSHED.with(|f| f.set(f.get() + live));
}

pub fn current_scope() -> Scope {
    CURRENT.with(|c| c.get())
}

/// Restores the previous scope when dropped.
pub struct ScopeGuard {
    previous: Scope,
}

impl Drop for ScopeGuard {
    fn drop(&mut self) {
        flush();
        CURRENT.with(|c| c.set(self.previous));
    }
}

/// Make `scope` the active scope until the guard is dropped.
pub fn enter(scope: Scope) -> ScopeGuard {
    flush();
    let previous = CURRENT.with(|c| c.replace(scope));
    ScopeGuard { previous }
}

pub fn with_scope<R>(scope: Scope, f: impl FnOnce() -> R) -> R {
    let _g = enter(scope);
    f()
}

/// Everything counted on this thread since the last [`reset`], across all scopes.
pub fn total() -> OpCounts {
    FLUSHED.with(|f| f.get()) + LIVE.with(|c| c.get())
}

/// Run `f` and return the operations it performed, regardless of scope.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, OpCounts) {
    let before = total();
    let r = f();
    (r, total() - before)
}

/// Credit `counts` to `scope` without performing the work again. Used when
/// several nodes would run a bit-identical computation on identical inputs.
pub fn charge(scope: Scope, counts: OpCounts) {
    TALLY.with(|t| *t.borrow_mut().entry(scope).or_default() += counts);
    FLUSHED.with(|f| f.set(f.get() + counts));
}

/// Per-scope totals recorded so far. The tally is left in place.
pub fn tally() -> BTreeMap<Scope, OpCounts> {
    flush();
    TALLY.with(|t| t.borrow().clone())
}

/// Per-scope totals recorded so far; clears the tally.
pub fn take_tally() -> BTreeMap<Scope, OpCounts> {
    flush();
    TALLY.with(|t| std::mem::take(&mut *t.borrow_mut()))
}

/// Clear all counters and return to the unscoped state.
pub fn reset() {
    LIVE.with(|c| c.set(OpCounts::default()));
    FLUSHED.with(|c| c.set(OpCounts::default()));
    TALLY.with(|t| t.borrow_mut().clear());
    CURRENT.with(|c| c.set(Scope::UNSCOPED));
}

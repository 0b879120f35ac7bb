//! Rebuild contract and balance state from the event log alone.
//!
//! The fold shares no code with the engine's transitions.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::engine::{ContractId, ContractRecord, ContractState, Engine};
use crate::identity::Address;
use crate::ledger::{AccountState, EventData, Ledger, LedgerEvent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event {index}: {message}")]
pub struct ReplayError {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayedState {
    pub contracts: BTreeMap<ContractId, ContractRecord>,
    pub balances: BTreeMap<Address, u64>,
}

impl ReplayedState {
    pub fn from_genesis(allocations: &[(Address, u64)]) -> Self {
        Self {
            contracts: BTreeMap::new(),
            balances: allocations.iter().copied().collect(),
        }
    }

    pub fn apply(&mut self, index: usize, event: &LedgerEvent) -> Result<(), ReplayError> {
        apply_to_contracts(&mut self.contracts, index, event)?;
        if let EventData::ContractTransfer {
            sender,
            receiver,
            amount,
            ..
        } = &event.data
        {
            let fail = |message: String| ReplayError { index, message };
            let from = self.balances.entry(*sender).or_insert(0);
            *from = from
                .checked_sub(*amount)
                .ok_or_else(|| fail(format!("{sender} overdrawn")))?;
            let to = self.balances.entry(*receiver).or_insert(0);
            *to = to
                .checked_add(*amount)
                .ok_or_else(|| fail(format!("{receiver} overflows")))?;
        }
        Ok(())
    }

    /// Describes the first difference from live engine state, if any.
    pub fn diff(&self, engine: &Engine, accounts: &AccountState) -> Option<String> {
        if self.balances != *accounts.as_map() {
            return Some("balances differ".into());
        }
        if self.contracts.len() != engine.contracts().len() {
            return Some(format!(
                "{} contracts replayed, engine holds {}",
                self.contracts.len(),
                engine.contracts().len()
            ));
        }
        for (replayed, live) in self.contracts.values().zip(engine.contracts()) {
            if replayed != live {
                return Some(format!("contract {} differs", live.contract_id));
            }
        }
        None
    }
}

fn apply_to_contracts(
    contracts: &mut BTreeMap<ContractId, ContractRecord>,
    index: usize,
    event: &LedgerEvent,
) -> Result<(), ReplayError> {
    let fail = |message: String| ReplayError { index, message };
    let id = event.contract_id;

    if let EventData::ContractCreated {
        participants,
        creator,
        document_fingerprint,
        hash_method,
    } = &event.data
    {
        if contracts.contains_key(&id) {
            return Err(fail(format!("contract {id} created twice")));
        }
        contracts.insert(
            id,
            ContractRecord {
                contract_id: id,
                participants: *participants,
                creator: *creator,
                document_fingerprint: *document_fingerprint,
                hash_method: *hash_method,
                signed_by: BTreeSet::new(),
                unsigned_by: BTreeSet::new(),
                state: ContractState::Pending,
            },
        );
        return Ok(());
    }

    let record = contracts
        .get_mut(&id)
        .ok_or_else(|| fail(format!("event for unknown contract {id}")))?;
    match &event.data {
        EventData::ContractCreated { .. } => unreachable!("handled above"),
        EventData::ContractSigned => {
            record.signed_by.insert(event.actor);
        }
        EventData::ContractActivated => record.state = ContractState::Active,
        EventData::ContractUnsigned => {
            record.unsigned_by.insert(event.actor);
            record.state = ContractState::PendingDeactivation;
        }
        EventData::ContractDeactivated => record.state = ContractState::Deactivated,
        EventData::ContractTransfer { .. } => {}
    }
    Ok(())
}

/// Folds `events` over the genesis balances.
pub fn replay_events(
    genesis: &[(Address, u64)],
    events: &[LedgerEvent],
) -> Result<ReplayedState, ReplayError> {
    let mut state = ReplayedState::from_genesis(genesis);
    for (index, event) in events.iter().enumerate() {
        state.apply(index, event)?;
    }
    Ok(state)
}

pub fn replay_ledger(ledger: &Ledger<Engine>) -> Result<ReplayedState, ReplayError> {
    replay_events(&ledger.genesis_allocations(), ledger.events())
}

/// Rebuilds one contract's record from its own events, ignoring balances.
pub(crate) fn replay_contract(
    contract_id: ContractId,
    events: &[LedgerEvent],
) -> Result<ContractRecord, ReplayError> {
    let mut contracts = BTreeMap::new();
    for (index, event) in events.iter().enumerate() {
        apply_to_contracts(&mut contracts, index, event)?;
    }
    contracts.remove(&contract_id).ok_or(ReplayError {
        index: 0,
        message: format!("no creation event for contract {contract_id}"),
    })
}

//! The hybrid-contract state machine.
//!
//! Lifecycle of a contract:
//!
//! ```text
//! create (creator signs) -> Pending
//! counterparty signs     -> Active
//! first party unsigns    -> PendingDeactivation
//! second party unsigns   -> Deactivated (terminal)
//! ```
//!
//! Transfers against an invoice are accepted while the contract is Active or
//! PendingDeactivation. Unsigning cannot be undone.
//!
//! [`Engine`] only validates and applies payloads; ordering, signatures and
//! persistence belong to the ledger it is plugged into.

mod contract;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::fingerprint::{Fingerprint, HashAlgorithm};
use crate::identity::{Address, KeyPair};
use crate::ledger::{
    AccountState, EventData, Ledger, LedgerEvent, Payload, StateMachine, SubmitError, TxRef,
};

pub use contract::{ContractId, ContractRecord, ContractState, Invoice};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("a contract needs two distinct participants")]
    DuplicateParticipant,
    #[error("fingerprint {fingerprint} is not a {hash_method} digest")]
    MalformedFingerprint {
        fingerprint: Fingerprint,
        hash_method: HashAlgorithm,
    },
    #[error("unknown contract {0}")]
    UnknownContract(ContractId),
    #[error("{actor} is not a participant of contract {contract_id}")]
    NotParticipant {
        actor: Address,
        contract_id: ContractId,
    },
    #[error("{0} has already signed this contract")]
    AlreadySigned(Address),
    #[error("{0} has already unsigned this contract")]
    AlreadyUnsigned(Address),
    #[error("contract {contract_id} is {state}")]
    WrongState {
        contract_id: ContractId,
        state: ContractState,
    },
    #[error("contract {contract_id} is {state} and does not accept transfers")]
    ContractNotActive {
        contract_id: ContractId,
        state: ContractState,
    },
    #[error("only the payer may submit a transfer")]
    CallerNotPayer,
    #[error("payer and payee are the same")]
    SelfPayment,
    #[error("transfer amount must be positive")]
    ZeroAmount,
    #[error("insufficient funds: balance {available}, needed {required}")]
    InsufficientFunds { available: u64, required: u64 },
    #[error("{0} payloads are not handled by the contract engine")]
    UnsupportedPayload(&'static str),
}

impl ContractError {
    /// Stable variant name, for machine-readable output.
    pub fn code(&self) -> &'static str {
        match self {
            ContractError::DuplicateParticipant => "DuplicateParticipant",
            ContractError::MalformedFingerprint { .. } => "MalformedFingerprint",
            ContractError::UnknownContract(_) => "UnknownContract",
            ContractError::NotParticipant { .. } => "NotParticipant",
            ContractError::AlreadySigned(_) => "AlreadySigned",
            ContractError::AlreadyUnsigned(_) => "AlreadyUnsigned",
            ContractError::WrongState { .. } => "WrongState",
            ContractError::ContractNotActive { .. } => "ContractNotActive",
            ContractError::CallerNotPayer => "CallerNotPayer",
            ContractError::SelfPayment => "SelfPayment",
            ContractError::ZeroAmount => "ZeroAmount",
            ContractError::InsufficientFunds { .. } => "InsufficientFunds",
            ContractError::UnsupportedPayload(_) => "UnsupportedPayload",
        }
    }
}

/// A validated state change, produced by [`Engine::check`](StateMachine::check).
#[derive(Debug, Clone)]
pub enum Transition {
    Create(ContractRecord),
    Sign {
        contract_id: ContractId,
        signer: Address,
        state: ContractState,
    },
    Transfer {
        payer: Address,
        payee: Address,
        amount: u64,
    },
    Unsign {
        contract_id: ContractId,
        signer: Address,
        state: ContractState,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Engine {
    contracts: Vec<ContractRecord>,
    by_actor: BTreeMap<Address, BTreeSet<ContractId>>,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contracts(&self) -> &[ContractRecord] {
        &self.contracts
    }

    pub fn read_contract(&self, contract_id: ContractId) -> Result<&ContractRecord, ContractError> {
        usize::try_from(contract_id.0)
            .ok()
            .and_then(|i| self.contracts.get(i))
            .ok_or(ContractError::UnknownContract(contract_id))
    }

    /// Ascending ids of every contract `actor` participates in.
    pub fn read_contract_ids(&self, actor: &Address) -> Vec<ContractId> {
        self.by_actor
            .get(actor)
            .map(|ids| ids.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn read_is_actor(
        &self,
        actor: &Address,
        contract_id: ContractId,
    ) -> Result<bool, ContractError> {
        Ok(self.read_contract(contract_id)?.is_participant(actor))
    }

    fn participant_record(
        &self,
        caller: &Address,
        contract_id: ContractId,
    ) -> Result<&ContractRecord, ContractError> {
        let record = self.read_contract(contract_id)?;
        if !record.is_participant(caller) {
            return Err(ContractError::NotParticipant {
                actor: *caller,
                contract_id,
            });
        }
        Ok(record)
    }

    fn check_create(
        &self,
        caller: &Address,
        counterparty: &Address,
        document_fingerprint: &Fingerprint,
        hash_method: HashAlgorithm,
        tx_ref: TxRef,
    ) -> Result<(Transition, Vec<LedgerEvent>), ContractError> {
        if caller == counterparty {
            return Err(ContractError::DuplicateParticipant);
        }
        if document_fingerprint.algorithm() != hash_method {
            return Err(ContractError::MalformedFingerprint {
                fingerprint: *document_fingerprint,
                hash_method,
            });
        }
        let contract_id = ContractId(self.contracts.len() as u64);
        let record = ContractRecord {
            contract_id,
            participants: [*caller, *counterparty],
            creator: *caller,
            document_fingerprint: *document_fingerprint,
            hash_method,
            signed_by: BTreeSet::from([*caller]),
            unsigned_by: BTreeSet::new(),
            state: ContractState::Pending,
        };
        let event = |data| LedgerEvent {
            contract_id,
            actor: *caller,
            data,
            tx_ref,
        };
        let events = vec![
            event(EventData::ContractCreated {
                participants: record.participants,
                creator: *caller,
                document_fingerprint: *document_fingerprint,
                hash_method,
            }),
            event(EventData::ContractSigned),
        ];
        Ok((Transition::Create(record), events))
    }

    fn check_sign(
        &self,
        caller: &Address,
        contract_id: ContractId,
        tx_ref: TxRef,
    ) -> Result<(Transition, Vec<LedgerEvent>), ContractError> {
        let record = self.participant_record(caller, contract_id)?;
        if record.state != ContractState::Pending {
            return Err(ContractError::WrongState {
                contract_id,
                state: record.state,
            });
        }
        if record.signed_by.contains(caller) {
            return Err(ContractError::AlreadySigned(*caller));
        }
        let event = |data| LedgerEvent {
            contract_id,
            actor: *caller,
            data,
            tx_ref,
        };
        // Two participants: the second signature always completes the set.
        Ok((
            Transition::Sign {
                contract_id,
                signer: *caller,
                state: ContractState::Active,
            },
            vec![
                event(EventData::ContractSigned),
                event(EventData::ContractActivated),
            ],
        ))
    }

    fn check_transfer(
        &self,
        accounts: &AccountState,
        caller: &Address,
        invoice: &Invoice,
        tx_ref: TxRef,
    ) -> Result<(Transition, Vec<LedgerEvent>), ContractError> {
        let contract_id = invoice.contract_id;
        let record = self.participant_record(caller, contract_id)?;
        for party in [&invoice.payer, &invoice.payee] {
            if !record.is_participant(party) {
                return Err(ContractError::NotParticipant {
                    actor: *party,
                    contract_id,
                });
            }
        }
        if *caller != invoice.payer {
            return Err(ContractError::CallerNotPayer);
        }
        if invoice.payer == invoice.payee {
            return Err(ContractError::SelfPayment);
        }
        if invoice.amount == 0 {
            return Err(ContractError::ZeroAmount);
        }
        if !record.state.accepts_transfers() {
            return Err(ContractError::ContractNotActive {
                contract_id,
                state: record.state,
            });
        }
        let available = accounts.balance(&invoice.payer);
        if available < invoice.amount {
            return Err(ContractError::InsufficientFunds {
                available,
                required: invoice.amount,
            });
        }
        let event = LedgerEvent {
            contract_id,
            actor: invoice.payer,
            data: EventData::ContractTransfer {
                sender: invoice.payer,
                receiver: invoice.payee,
                amount: invoice.amount,
                invoice_fingerprint: invoice.invoice_fingerprint,
            },
            tx_ref,
        };
        Ok((
            Transition::Transfer {
                payer: invoice.payer,
                payee: invoice.payee,
                amount: invoice.amount,
            },
            vec![event],
        ))
    }

    fn check_unsign(
        &self,
        caller: &Address,
        contract_id: ContractId,
        tx_ref: TxRef,
    ) -> Result<(Transition, Vec<LedgerEvent>), ContractError> {
        let record = self.participant_record(caller, contract_id)?;
        if !matches!(
            record.state,
            ContractState::Active | ContractState::PendingDeactivation
        ) {
            return Err(ContractError::WrongState {
                contract_id,
                state: record.state,
            });
        }
        if record.unsigned_by.contains(caller) {
            return Err(ContractError::AlreadyUnsigned(*caller));
        }
        let event = |data| LedgerEvent {
            contract_id,
            actor: *caller,
            data,
            tx_ref,
        };
        let mut events = vec![event(EventData::ContractUnsigned)];
        let state = if record.unsigned_by.len() + 1 == record.participants.len() {
            events.push(event(EventData::ContractDeactivated));
            ContractState::Deactivated
        } else {
            ContractState::PendingDeactivation
        };
        Ok((
            Transition::Unsign {
                contract_id,
                signer: *caller,
                state,
            },
            events,
        ))
    }

    fn record_mut(&mut self, contract_id: ContractId) -> &mut ContractRecord {
        &mut self.contracts[contract_id.0 as usize]
    }
}

impl StateMachine for Engine {
    type Error = ContractError;
    type Transition = Transition;

    fn check(
        &self,
        accounts: &AccountState,
        sender: &Address,
        payload: &Payload,
        tx_ref: TxRef,
    ) -> Result<(Transition, Vec<LedgerEvent>), ContractError> {
        match payload {
            Payload::CreateContract {
                counterparty,
                document_fingerprint,
                hash_method,
            } => self.check_create(
                sender,
                counterparty,
                document_fingerprint,
                *hash_method,
                tx_ref,
            ),
            Payload::SignContract { contract_id } => self.check_sign(sender, *contract_id, tx_ref),
            Payload::Transfer { invoice } => self.check_transfer(accounts, sender, invoice, tx_ref),
            Payload::Unsign { contract_id } => self.check_unsign(sender, *contract_id, tx_ref),
            Payload::GenesisAllocation { .. } => {
                Err(ContractError::UnsupportedPayload(payload.name()))
            }
        }
    }

    fn apply(&mut self, accounts: &mut AccountState, transition: Transition) {
        match transition {
            Transition::Create(record) => {
                for actor in record.participants {
                    self.by_actor
                        .entry(actor)
                        .or_default()
                        .insert(record.contract_id);
                }
                self.contracts.push(record);
            }
            Transition::Sign {
                contract_id,
                signer,
                state,
            } => {
                let record = self.record_mut(contract_id);
                record.signed_by.insert(signer);
                record.state = state;
            }
            Transition::Transfer {
                payer,
                payee,
                amount,
            } => accounts.transfer(&payer, &payee, amount),
            Transition::Unsign {
                contract_id,
                signer,
                state,
            } => {
                let record = self.record_mut(contract_id);
                record.unsigned_by.insert(signer);
                record.state = state;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Contract operations over a ledger
// ---------------------------------------------------------------------------

pub type ContractLedger = Ledger<Engine>;
pub type ContractSubmitError = SubmitError<ContractError>;

/// Where a transfer landed and the event it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferReceipt {
    pub tx_ref: TxRef,
    pub event: LedgerEvent,
}

impl Ledger<Engine> {
    /// Registers a contract between `caller` and `counterparty`; the caller signs it
    /// at creation.
    pub fn create_contract(
        &mut self,
        caller: &KeyPair,
        counterparty: Address,
        document_fingerprint: Fingerprint,
        hash_method: HashAlgorithm,
    ) -> Result<ContractId, ContractSubmitError> {
        self.submit_signed(
            caller,
            Payload::CreateContract {
                counterparty,
                document_fingerprint,
                hash_method,
            },
        )?;
        Ok(self
            .machine()
            .contracts()
            .last()
            .expect("contract just created")
            .contract_id)
    }

    pub fn create_contract_signature(
        &mut self,
        caller: &KeyPair,
        contract_id: ContractId,
    ) -> Result<ContractState, ContractSubmitError> {
        self.submit_signed(caller, Payload::SignContract { contract_id })?;
        Ok(self.contract_state(contract_id))
    }

    /// Pays `invoice` from its payer, who must be the caller.
    pub fn create_contract_transfer(
        &mut self,
        caller: &KeyPair,
        invoice: Invoice,
    ) -> Result<TransferReceipt, ContractSubmitError> {
        let tx_ref = self.submit_signed(caller, Payload::Transfer { invoice })?;
        let event = self
            .events()
            .last()
            .expect("transfer emits an event")
            .clone();
        Ok(TransferReceipt { tx_ref, event })
    }

    pub fn update_contract_unsign(
        &mut self,
        caller: &KeyPair,
        contract_id: ContractId,
    ) -> Result<ContractState, ContractSubmitError> {
        self.submit_signed(caller, Payload::Unsign { contract_id })?;
        Ok(self.contract_state(contract_id))
    }

    pub fn read_contract(&self, contract_id: ContractId) -> Result<&ContractRecord, ContractError> {
        self.machine().read_contract(contract_id)
    }

    pub fn read_contract_ids(&self, actor: &Address) -> Vec<ContractId> {
        self.machine().read_contract_ids(actor)
    }

    pub fn read_is_actor(
        &self,
        actor: &Address,
        contract_id: ContractId,
    ) -> Result<bool, ContractError> {
        self.machine().read_is_actor(actor, contract_id)
    }

    fn contract_state(&self, contract_id: ContractId) -> ContractState {
        self.read_contract(contract_id)
            .expect("contract exists after an accepted transaction")
            .state
    }
}

use std::collections::BTreeMap;

use serde::Serialize;

use crate::identity::Address;

/// Balances in the smallest currency unit. Value only moves between
/// accounts after genesis, so the total never changes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct AccountState {
    balances: BTreeMap<Address, u64>,
}

impl AccountState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unknown addresses hold 0.
    pub fn balance(&self, address: &Address) -> u64 {
        self.balances.get(address).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u128 {
        self.balances.values().map(|&v| u128::from(v)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Address, &u64)> {
        self.balances.iter()
    }

    pub fn as_map(&self) -> &BTreeMap<Address, u64> {
        &self.balances
    }

    pub(crate) fn allocate(&mut self, address: Address, amount: u64) {
        self.balances.insert(address, amount);
    }

    /// Moves `amount` from `from` to `to`. The caller must have checked the
    /// payer's balance.
    pub(crate) fn transfer(&mut self, from: &Address, to: &Address, amount: u64) {
        let from_balance = self
            .balances
            .get_mut(from)
            .expect("payer balance checked before transfer");
        *from_balance = from_balance
            .checked_sub(amount)
            .expect("payer balance checked before transfer");
        let to_balance = self.balances.entry(*to).or_insert(0);
        // Bounded by the genesis supply, which fits in u64.
        *to_balance = to_balance.checked_add(amount).expect("supply fits in u64");
    }
}

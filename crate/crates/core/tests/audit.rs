use mhc_core::audit::{
    audit_contract, build_evidence, export_evidence, replay_ledger, verify_document_link,
    verify_evidence_bytes, Anomaly, AuditError, EvidenceError,
};
use mhc_core::fingerprint::{fingerprint_document, verify_fingerprint};
use mhc_core::ledger::tip_path;
use mhc_core::{
    ClockMode, ContractId, ContractLedger, ContractState, Engine, EventFilter, EventKind,
    HashAlgorithm, Invoice, KeyPair, Ledger,
};

const LEASE: &[u8] = b"Lease agreement between A and B. Rent: 40 per month.";

fn key(n: u8) -> KeyPair {
    KeyPair::from_seed([n; 32])
}

fn invoice(id: ContractId, payer: &KeyPair, payee: &KeyPair, amount: u64) -> Invoice {
    Invoice {
        contract_id: id,
        payer: payer.address(),
        payee: payee.address(),
        amount,
        invoice_fingerprint: fingerprint_document(
            format!("invoice for {amount}").as_bytes(),
            HashAlgorithm::Sha256,
        ),
    }
}

fn scenario() -> (ContractLedger, KeyPair, KeyPair, ContractId) {
    let (a, b) = (key(1), key(2));
    let mut ledger = Ledger::init(
        &[(a.address(), 100), (b.address(), 50)],
        ClockMode::Logical,
        Engine::new(),
    )
    .unwrap();
    let doc = fingerprint_document(LEASE, HashAlgorithm::Sha256);
    let id = ledger
        .create_contract(&a, b.address(), doc, HashAlgorithm::Sha256)
        .unwrap();
    ledger.create_contract_signature(&b, id).unwrap();
    (ledger, a, b, id)
}

#[test]
fn totals_sum_each_direction() {
    let (mut ledger, a, b, id) = scenario();
    ledger
        .create_contract_transfer(&a, invoice(id, &a, &b, 40))
        .unwrap();
    ledger
        .create_contract_transfer(&a, invoice(id, &a, &b, 10))
        .unwrap();

    let report = audit_contract(&ledger, id).unwrap();
    assert_eq!(report.transfers.len(), 2);
    let totals = report.totals();
    assert_eq!(
        (totals[0].from, totals[0].to, totals[0].amount),
        (a.address(), b.address(), 50)
    );
    assert_eq!(
        (totals[1].from, totals[1].to, totals[1].amount),
        (b.address(), a.address(), 0)
    );
    assert!(report.integrity.is_ok());

    let json = report.to_json();
    assert_eq!(json["totals"][0]["amount"], 50);
    assert_eq!(json["totals"][1]["amount"], 0);
    assert_eq!(json["state"], "Active");
}

#[test]
fn fresh_contract_has_no_transfers() {
    let (ledger, _, _, id) = scenario();
    let report = audit_contract(&ledger, id).unwrap();
    assert!(report.transfers.is_empty());
    assert!(report.totals().iter().all(|t| t.amount == 0));
    assert_eq!(report.timeline.len(), 4);
    assert_eq!(report.timeline[3].kind, EventKind::ContractActivated);
    assert!(report.anomalies.is_empty());
    assert!(report.to_string().contains("(none)"));
}

#[test]
fn unknown_contract_is_an_error() {
    let (ledger, _, _, _) = scenario();
    assert!(matches!(
        audit_contract(&ledger, ContractId(9)),
        Err(AuditError::UnknownContract(ContractId(9)))
    ));
    assert!(matches!(
        verify_document_link(&ledger, ContractId(9), LEASE),
        Err(AuditError::UnknownContract(_))
    ));
}

#[test]
fn report_matches_after_reopening_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.mhc");
    let (ledger, a, b, id) = scenario();
    let mut ledger = ledger;
    ledger
        .create_contract_transfer(&a, invoice(id, &a, &b, 40))
        .unwrap();
    ledger.update_contract_unsign(&b, id).unwrap();
    ledger
        .create_contract_transfer(&b, invoice(id, &b, &a, 7))
        .unwrap();
    std::fs::write(&path, ledger.to_file_bytes()).unwrap();
    std::fs::write(tip_path(&path), ledger.tip_record().encode()).unwrap();

    let reopened = Ledger::open_read_only(&path, Engine::new()).unwrap();
    let original = audit_contract(&ledger, id).unwrap();
    let replayed = audit_contract(&reopened, id).unwrap();
    assert_eq!(
        serde_json::to_vec(&original.to_json()).unwrap(),
        serde_json::to_vec(&replayed.to_json()).unwrap()
    );
    assert_eq!(original.to_string(), replayed.to_string());
    assert!(matches!(
        original.anomalies.as_slice(),
        [Anomaly::TransferDuringPendingDeactivation { .. }]
    ));
}

#[test]
fn duplicate_documents_are_flagged() {
    let (mut ledger, a, b, first) = scenario();
    let doc = fingerprint_document(LEASE, HashAlgorithm::Sha256);
    let second = ledger
        .create_contract(&b, a.address(), doc, HashAlgorithm::Sha256)
        .unwrap();
    let report = audit_contract(&ledger, first).unwrap();
    assert_eq!(
        report.anomalies,
        vec![Anomaly::DuplicateDocumentFingerprint {
            fingerprint: doc,
            other_contracts: vec![second],
        }]
    );
}

#[test]
fn document_link_checks() {
    let (mut ledger, a, b, id) = scenario();
    assert!(verify_document_link(&ledger, id, LEASE).unwrap());

    let mut altered = LEASE.to_vec();
    altered[30] = b'X';
    assert!(!verify_document_link(&ledger, id, &altered).unwrap());

    let other_doc = fingerprint_document(b"another contract", HashAlgorithm::Keccak256);
    let other = ledger
        .create_contract(&b, a.address(), other_doc, HashAlgorithm::Keccak256)
        .unwrap();
    assert!(!verify_document_link(&ledger, other, LEASE).unwrap());
    assert!(verify_document_link(&ledger, other, b"another contract").unwrap());
}

#[test]
fn replay_matches_engine_state() {
    let (mut ledger, a, b, id) = scenario();
    ledger
        .create_contract_transfer(&a, invoice(id, &a, &b, 30))
        .unwrap();
    ledger.update_contract_unsign(&a, id).unwrap();
    ledger.update_contract_unsign(&b, id).unwrap();
    let replayed = replay_ledger(&ledger).unwrap();
    assert_eq!(replayed.diff(ledger.machine(), ledger.accounts()), None);
    assert_eq!(replayed.contracts[&id].state, ContractState::Deactivated);
}

#[test]
fn exported_bundle_verifies_offline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("evidence.mhce");
    let (mut ledger, a, b, id) = scenario();
    ledger
        .create_contract_transfer(&a, invoice(id, &a, &b, 40))
        .unwrap();
    let (c, d) = (key(3), key(4));
    let doc = fingerprint_document(b"unrelated", HashAlgorithm::Sha256);
    ledger
        .create_contract(&c, d.address(), doc, HashAlgorithm::Sha256)
        .unwrap();
    ledger.update_contract_unsign(&a, id).unwrap();

    let bundle = export_evidence(&ledger, id, &out).unwrap();
    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(bytes, bundle.to_file_bytes());

    let digest = bundle.export_fingerprint();
    assert!(verify_fingerprint(&bytes[..bytes.len() - 32], &digest));

    let verified = verify_evidence_bytes(&bytes).unwrap();
    assert_eq!(verified, bundle);
    assert_eq!(
        verified.events,
        ledger.get_events(EventFilter::contract(id))
    );
    assert_eq!(verified.contract, *ledger.read_contract(id).unwrap());
    // Headers span every height from creation to the last event, including
    // the unrelated contract's block.
    let first = verified.events.first().unwrap().tx_ref.height;
    let last = verified.events.last().unwrap().tx_ref.height;
    assert_eq!(verified.headers.len() as u64, last - first + 1);
    assert_eq!(verified.document_fingerprints.len(), 2);
}

#[test]
fn re_export_is_byte_identical() {
    let (mut ledger, a, b, id) = scenario();
    ledger
        .create_contract_transfer(&a, invoice(id, &a, &b, 40))
        .unwrap();
    let one = build_evidence(&ledger, id).unwrap().to_file_bytes();
    let two = build_evidence(&ledger, id).unwrap().to_file_bytes();
    assert_eq!(one, two);
}

#[test]
fn any_tampered_bundle_byte_is_rejected() {
    let (mut ledger, a, b, id) = scenario();
    ledger
        .create_contract_transfer(&a, invoice(id, &a, &b, 40))
        .unwrap();
    let bytes = build_evidence(&ledger, id).unwrap().to_file_bytes();
    for offset in 0..bytes.len() {
        let mut tampered = bytes.clone();
        tampered[offset] ^= 0x5a;
        assert!(
            verify_evidence_bytes(&tampered).is_err(),
            "mutation at offset {offset} went unnoticed"
        );
    }
    assert!(matches!(
        verify_evidence_bytes(&bytes[..bytes.len() - 1]),
        Err(EvidenceError::DigestMismatch)
    ));
    assert!(matches!(
        verify_evidence_bytes(b"MHCE"),
        Err(EvidenceError::Truncated)
    ));
}

//! Finality certificates as unforgeable tokens.
//!
//! A certificate binds an issuer to the digest of the ledger it finalizes
//! and to the timestamp of the issuer's head block. Tokens are only minted
//! by [`CertRegistry::issue`], so a certificate verifies exactly when the
//! issuer really produced it for that ledger.

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use serde::Serialize;

use crate::digest::Digest;
use crate::ledger::{consistent, Ledger, Tick};

/// Identifies a certificate issuer (a chain or a composed protocol).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Issuer(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Certificate {
    pub issuer: Issuer,
    pub subject: Digest,
    pub head: Tick,
    pub token: u64,
}

/// A ledger together with the certificate proving its finality.
#[derive(Clone, Debug)]
pub struct CertifiedLedger {
    pub ledger: Ledger,
    pub head: Tick,
    pub cert: Option<Certificate>,
}

/// Raised when an issuer marked as safe certifies two conflicting ledgers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SoundnessBreach {
    pub issuer: Issuer,
    pub earlier: String,
    pub later: String,
}

#[derive(Default)]
pub struct CertRegistry {
    issued: HashMap<(Issuer, Digest, Tick), u64>,
    next_token: u64,
    // longest ledger certified so far by each issuer that promised safety
    safe_tip: HashMap<Issuer, Ledger>,
    safe_issuers: HashSet<Issuer>,
    breaches: Vec<SoundnessBreach>,
}

impl CertRegistry {
    pub fn new() -> CertRegistry {
        CertRegistry::default()
    }

    /// Marks an issuer whose certificates must never conflict.
    pub fn declare_safe(&mut self, issuer: Issuer) {
        self.safe_issuers.insert(issuer);
    }

    pub fn issue(&mut self, issuer: Issuer, ledger: &Ledger, head: Tick) -> Certificate {
        let subject = ledger.digest();
        if self.safe_issuers.contains(&issuer) {
            match self.safe_tip.get(&issuer) {
                Some(tip) if !consistent(tip, ledger) => {
                    self.breaches.push(SoundnessBreach { issuer, earlier: tip.encode(), later: ledger.encode() });
                }
                Some(tip) if tip.len() >= ledger.len() => {}
                _ => {
                    self.safe_tip.insert(issuer, ledger.clone());
                }
            }
        }
        let next = &mut self.next_token;
        let token = *self.issued.entry((issuer, subject, head)).or_insert_with(|| {
            *next += 1;
            *next
        });
        Certificate { issuer, subject, head, token }
    }

    /// Checks a certificate against the ledger and head it claims to certify.
    pub fn verify(&self, cert: &Certificate, ledger: &Ledger, head: Tick) -> bool {
        cert.subject == ledger.digest()
            && cert.head == head
            && self.issued.get(&(cert.issuer, cert.subject, cert.head)) == Some(&cert.token)
    }

    pub fn verify_certified(&self, c: &CertifiedLedger) -> bool {
        c.cert.as_ref().is_some_and(|cert| self.verify(cert, &c.ledger, c.head))
    }

    pub fn breaches(&self) -> &[SoundnessBreach] {
        &self.breaches
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn issued_certificates_verify_only_their_ledger() {
        let mut reg = CertRegistry::new();
        let a = Ledger::of_ids(&[1, 2]);
        let b = Ledger::of_ids(&[1, 3]);
        let c = reg.issue(Issuer(0), &a, 4);
        assert!(reg.verify(&c, &a, 4));
        assert!(!reg.verify(&c, &b, 4));
        assert!(!reg.verify(&c, &a, 6));
        let forged = Certificate { token: c.token + 99, ..c };
        assert!(!reg.verify(&forged, &a, 4));
    }

    #[test]
    fn safe_issuer_conflict_is_recorded() {
        let mut reg = CertRegistry::new();
        reg.declare_safe(Issuer(1));
        reg.issue(Issuer(1), &Ledger::of_ids(&[1]), 1);
        reg.issue(Issuer(1), &Ledger::of_ids(&[1, 2]), 2);
        assert!(reg.breaches().is_empty());
        reg.issue(Issuer(1), &Ledger::of_ids(&[1, 3]), 3);
        assert_eq!(reg.breaches().len(), 1);
        // unsafe issuers may certify anything
        reg.issue(Issuer(2), &Ledger::of_ids(&[4]), 1);
        reg.issue(Issuer(2), &Ledger::of_ids(&[5]), 1);
        assert_eq!(reg.breaches().len(), 1);
    }
}

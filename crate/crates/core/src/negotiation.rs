//! ECDH group negotiation: the AP advertises its groups, the client picks
//! the common group with the largest key, or falls back to WPA-PSK.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodecError, SoapIe};
use crate::crypto::{registry_lookup, CryptoError, EcGroup};
use crate::soap::StationIdentity;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupSetError {
    #[error(transparent)]
    Unregistered(#[from] CryptoError),
    #[error("a group list holds at most 255 ids, got {0}")]
    TooMany(usize),
}

/// A set of registered ECDH group ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct GroupSet(BTreeSet<u8>);

impl GroupSet {
    pub fn new(ids: impl IntoIterator<Item = u8>) -> Result<Self, GroupSetError> {
        let set: BTreeSet<u8> = ids.into_iter().collect();
        if set.len() > 255 {
            return Err(GroupSetError::TooMany(set.len()));
        }
        for &id in &set {
            registry_lookup(id)?;
        }
        Ok(Self(set))
    }

    /// Keeps only registered ids; used for group lists received off the air.
    pub fn from_advertised(ids: &[u8]) -> Self {
        Self(ids.iter().copied().filter(|&id| registry_lookup(id).is_ok()).collect())
    }

    pub fn contains(&self, id: u8) -> bool {
        self.0.contains(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Ids in ascending order.
    pub fn ids(&self) -> Vec<u8> {
        self.0.iter().copied().collect()
    }

    pub fn groups(&self) -> Vec<EcGroup> {
        self.0.iter().map(|&id| registry_lookup(id).expect("validated on construction")).collect()
    }

    pub fn intersection(&self, other: &GroupSet) -> GroupSet {
        GroupSet(self.0.intersection(&other.0).copied().collect())
    }
}

impl TryFrom<Vec<u8>> for GroupSet {
    type Error = GroupSetError;

    fn try_from(value: Vec<u8>) -> Result<Self, Self::Error> {
        GroupSet::new(value)
    }
}

impl From<GroupSet> for Vec<u8> {
    fn from(value: GroupSet) -> Self {
        value.ids()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegotiationOutcome {
    Soap(u8),
    WpaPskFallback,
}

/// Picks the common group with the largest key size; ties go to the smaller id.
pub fn select_group(ap_groups: &GroupSet, client_groups: &GroupSet) -> NegotiationOutcome {
    ap_groups
        .intersection(client_groups)
        .groups()
        .into_iter()
        .max_by(|a, b| a.key_size_octets().cmp(&b.key_size_octets()).then(b.id().cmp(&a.id())))
        .map_or(NegotiationOutcome::WpaPskFallback, |g| NegotiationOutcome::Soap(g.id()))
}

/// SOAP IE for a Beacon / Probe Response: all AP groups, ascending.
pub fn build_ap_advertisement(identity: &StationIdentity, ap_groups: &GroupSet) -> Result<SoapIe, CodecError> {
    let ie = SoapIe::new(ap_groups.ids(), identity.ecdsa.public_key_x().to_vec());
    ie.encode()?;
    Ok(ie)
}

/// SOAP IE for the Association Request, or `None` in WPA-PSK mode.
pub fn build_client_response(selection: NegotiationOutcome, identity: &StationIdentity) -> Option<SoapIe> {
    match selection {
        NegotiationOutcome::Soap(g) => Some(SoapIe::new(vec![g], identity.ecdsa.public_key_x().to_vec())),
        NegotiationOutcome::WpaPskFallback => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{parse_soap_ie, MacAddr};
    use crate::crypto::{registry_lookup, EcdsaKeyPair};
    use crate::soap::Role;
    use proptest::prelude::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn gs(ids: &[u8]) -> GroupSet {
        GroupSet::new(ids.iter().copied()).unwrap()
    }

    fn identity(group: u8) -> StationIdentity {
        let g = registry_lookup(group).unwrap();
        StationIdentity {
            mac: MacAddr([2, 0, 0, 0, 0, 1]),
            ecdsa: EcdsaKeyPair::generate(g, &mut ChaCha20Rng::seed_from_u64(group as u64)),
            role: Role::Ap,
        }
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select_group(&gs(&[26]), &gs(&[26])), NegotiationOutcome::Soap(26));
        assert_eq!(select_group(&gs(&[26, 19]), &gs(&[19, 26])), NegotiationOutcome::Soap(19));
        assert_eq!(select_group(&gs(&[26]), &gs(&[19])), NegotiationOutcome::WpaPskFallback);
        assert_eq!(select_group(&gs(&[]), &gs(&[19])), NegotiationOutcome::WpaPskFallback);
    }

    #[test]
    fn unregistered_ids_rejected_or_filtered() {
        assert!(GroupSet::new([0u8]).is_err());
        assert_eq!(GroupSet::from_advertised(&[0, 26, 200]), gs(&[26]));
        assert!(serde_json::from_str::<GroupSet>("[26, 7]").is_err());
        assert_eq!(serde_json::from_str::<GroupSet>("[26, 19]").unwrap(), gs(&[19, 26]));
    }

    #[test]
    fn advertisement_examples() {
        let id = identity(26);
        let ie = build_ap_advertisement(&id, &gs(&[26])).unwrap();
        assert_eq!((ie.group_count(), ie.key_size()), (1, 28));
        assert_eq!(ie.encode().unwrap().len(), 33);
        let ie = build_ap_advertisement(&id, &gs(&[26, 19])).unwrap();
        assert_eq!(ie.group_list, vec![19, 26]);
        let ie = build_ap_advertisement(&id, &gs(&[])).unwrap();
        assert_eq!(ie.group_count(), 0);
    }

    #[test]
    fn client_response_examples() {
        let id = identity(26);
        let ie = build_client_response(NegotiationOutcome::Soap(26), &id).unwrap();
        assert_eq!(ie.group_list, vec![26]);
        assert!(build_client_response(NegotiationOutcome::WpaPskFallback, &id).is_none());

        // ECDSA identity on a 256-bit curve, ECDH group 224-bit.
        let id256 = identity(19);
        let ie = build_client_response(NegotiationOutcome::Soap(26), &id256).unwrap();
        let parsed = parse_soap_ie(&ie.encode().unwrap()).unwrap();
        assert_eq!((parsed.key_size(), parsed.group_list.clone()), (32, vec![26]));
    }

    fn arb_set() -> impl Strategy<Value = GroupSet> {
        prop::sample::subsequence(vec![19u8, 20, 21, 26], 0..=4).prop_map(|v| gs(&v))
    }

    proptest! {
        #[test]
        fn selected_group_is_common(a in arb_set(), b in arb_set()) {
            match select_group(&a, &b) {
                NegotiationOutcome::Soap(g) => prop_assert!(a.contains(g) && b.contains(g)),
                NegotiationOutcome::WpaPskFallback => prop_assert!(a.intersection(&b).is_empty()),
            }
            prop_assert_eq!(select_group(&a, &b), select_group(&b, &a));
        }

        #[test]
        fn adding_a_larger_group_wins(a in arb_set(), b in arb_set()) {
            // 21 (P-521) has the largest key of the registry.
            let mut a2 = a.ids(); a2.push(21);
            let mut b2 = b.ids(); b2.push(21);
            prop_assert_eq!(select_group(&gs(&a2), &gs(&b2)), NegotiationOutcome::Soap(21));
        }
    }
}

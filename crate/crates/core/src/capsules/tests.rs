use proptest::prelude::*;

use super::*;

fn viewer(id: u64, lineage: &str, mature: bool) -> Viewer {
    Viewer {
        agent: AgentId(id),
        name: format!("{lineage} I"),
        lineage: Some(LineageId::from_name(lineage)),
        guest: false,
        mature,
    }
}

fn guest(id: u64) -> Viewer {
    Viewer {
        agent: AgentId(id),
        name: format!("Guest {id}"),
        lineage: None,
        guest: true,
        mature: false,
    }
}

fn participant(v: &Viewer) -> Participant {
    Participant {
        agent: v.agent,
        name: v.name.clone(),
    }
}

fn note(title: &str) -> NewCapsule {
    NewCapsule {
        title: title.into(),
        content: "body".into(),
        tags: vec![],
        abstract_text: Some("summary".into()),
        recipients: vec![],
    }
}

#[test]
fn ids_are_per_room_and_never_reused() {
    let a = viewer(1, "aion", true);
    let mut store = CapsuleStore::default();
    assert_eq!(store.create(&a, CapsuleRoom::PublicMemory, note("x"), 1).unwrap(), 1);
    assert_eq!(store.create(&a, CapsuleRoom::PrivateMemory, note("y"), 1).unwrap(), 1);
    store
        .delete(&a, CapsuleRoom::PublicMemory, IdItem::Capsule(1), 2)
        .unwrap();
    assert_eq!(store.create(&a, CapsuleRoom::PublicMemory, note("z"), 3).unwrap(), 2);
    let entries = store.preview(&a, CapsuleRoom::PublicMemory, "1:2").unwrap();
    assert!(matches!(entries[0], PreviewEntry::Unavailable(_)));
    assert!(matches!(entries[1], PreviewEntry::Available { id: 2, .. }));
}

#[test]
fn private_memory_is_lineage_scoped() {
    let a = viewer(1, "aion", true);
    let a2 = viewer(5, "aion", true);
    let b = viewer(2, "borea", true);
    let mut store = CapsuleStore::default();
    store.create(&a, CapsuleRoom::PrivateMemory, note("plan"), 1).unwrap();
    assert_eq!(store.visible(CapsuleRoom::PrivateMemory, &a2).count(), 1);
    assert_eq!(store.visible(CapsuleRoom::PrivateMemory, &b).count(), 0);
    // A later generation may edit its predecessor's notes.
    store
        .update(
            &a2,
            CapsuleRoom::PrivateMemory,
            IdItem::Message(1, 1),
            CapsuleChanges {
                content: Some("revised".into()),
                ..Default::default()
            },
            2,
        )
        .unwrap();
    assert!(matches!(
        store.read(&b, CapsuleRoom::PrivateMemory, "1").unwrap()[0],
        ReadEntry::Unavailable(_)
    ));
}

#[test]
fn mail_forward_and_participants() {
    let a = viewer(1, "aion", true);
    let b = viewer(2, "borea", true);
    let c = viewer(3, "cirrus", true);
    let mut store = CapsuleStore::default();
    let mut mail = note("hi");
    mail.recipients = vec![participant(&b)];
    let id = store.create(&a, CapsuleRoom::Mail, mail, 1).unwrap();
    assert_eq!(store.visible(CapsuleRoom::Mail, &c).count(), 0);
    assert_eq!(
        store.reply(&c, CapsuleRoom::Mail, id, "x".into(), None, 1),
        Err(CapsuleError::NotVisible("1".into()))
    );
    assert_eq!(
        store.reply(&b, CapsuleRoom::Mail, id, "yo".into(), None, 2).unwrap(),
        "1-2"
    );
    store
        .forward(&b, CapsuleRoom::Mail, id, vec![participant(&c)], 3)
        .unwrap();
    assert_eq!(store.visible(CapsuleRoom::Mail, &c).count(), 1);
    assert_eq!(
        store.forward(&a, CapsuleRoom::PublicMemory, 1, vec![], 3),
        Err(CapsuleError::WrongRoom("forward"))
    );
}

#[test]
fn archive_review_cycle() {
    let a = viewer(1, "aion", true);
    let b = viewer(2, "borea", true);
    let mut store = CapsuleStore::default();
    let id = store.create(&a, CapsuleRoom::Archive, note("paper"), 1).unwrap();
    assert_eq!(store.pending_review(), vec![id]);
    assert_eq!(store.visible(CapsuleRoom::Archive, &b).count(), 0);
    assert_eq!(store.visible(CapsuleRoom::Archive, &a).count(), 1);

    assert!(store.apply_verdict(id, false, "cite evaluations".into(), 2));
    let ack = store
        .update(
            &a,
            CapsuleRoom::Archive,
            IdItem::Capsule(id),
            CapsuleChanges {
                abstract_text: Some("better".into()),
                ..Default::default()
            },
            3,
        )
        .unwrap();
    assert_eq!(ack, UpdateAck::Capsule { id, resubmitted: true });
    assert_eq!(store.get(CapsuleRoom::Archive, id).unwrap().review_attempt, 2);

    assert!(store.apply_verdict(id, true, "fine".into(), 4));
    assert_eq!(store.visible(CapsuleRoom::Archive, &b).count(), 1);
    assert_eq!(
        store.delete(&a, CapsuleRoom::Archive, IdItem::Capsule(id), 5),
        Err(CapsuleError::Published("1".into()))
    );
}

#[test]
fn only_authors_edit_shared_rooms() {
    let a = viewer(1, "aion", true);
    let b = viewer(2, "borea", true);
    let mut store = CapsuleStore::default();
    let id = store.create(&a, CapsuleRoom::PublicMemory, note("x"), 1).unwrap();
    store
        .reply(&b, CapsuleRoom::PublicMemory, id, "reply".into(), None, 1)
        .unwrap();
    assert_eq!(
        store.delete(&b, CapsuleRoom::PublicMemory, IdItem::Capsule(id), 2),
        Err(CapsuleError::NotAuthor("1".into()))
    );
    store
        .delete(&b, CapsuleRoom::PublicMemory, IdItem::Message(id, 2), 2)
        .unwrap();
    let read = store.read(&a, CapsuleRoom::PublicMemory, "1").unwrap();
    let ReadEntry::Capsule(c) = &read[0] else { panic!() };
    assert_eq!(c.messages.len(), 1);
}

#[test]
fn guest_and_maturity_restrictions() {
    let g = guest(9);
    let young = viewer(1, "aion", false);
    let mut store = CapsuleStore::default();
    assert_eq!(
        store.create(&g, CapsuleRoom::PrivateMemory, note("x"), 1),
        Err(CapsuleError::GuestRestricted("Private Memory Room"))
    );
    assert_eq!(
        store.create(&g, CapsuleRoom::PublicMemory, note("x"), 1),
        Err(CapsuleError::GuestRestricted("Public Memory Room"))
    );
    assert_eq!(
        store.read(&young, CapsuleRoom::Archive, "all"),
        Err(CapsuleError::ImmatureRestricted("Archive Room"))
    );
    assert!(store.create(&young, CapsuleRoom::PrivateMemory, note("x"), 1).is_ok());
}

#[test]
fn malformed_expressions_are_reported() {
    let a = viewer(1, "aion", true);
    let store = CapsuleStore::default();
    assert!(matches!(
        store.read(&a, CapsuleRoom::PublicMemory, "3:1"),
        Err(CapsuleError::MalformedExpression(_))
    ));
}

#[derive(Debug, Clone)]
enum Op {
    Create {
        author: usize,
        room: usize,
        recipients: Vec<usize>,
    },
    Delete {
        author: usize,
        room: usize,
        id: u32,
    },
    Forward {
        author: usize,
        id: u32,
        to: usize,
    },
    Verdict {
        id: u32,
        accept: bool,
    },
}

const ROOMS: [CapsuleRoom; 4] = CapsuleRoom::ALL;
const AGENTS: usize = 5;

fn agents() -> Vec<Viewer> {
    // Agents 0 and 1 share a lineage.
    ["aion", "aion", "borea", "cirrus", "delta"]
        .iter()
        .enumerate()
        .map(|(i, l)| viewer(i as u64 + 1, l, true))
        .collect()
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..AGENTS, 0..4usize, prop::collection::vec(0..AGENTS, 1..3))
            .prop_map(|(author, room, recipients)| Op::Create { author, room, recipients }),
        1 => (0..AGENTS, 0..4usize, 1..12u32).prop_map(|(author, room, id)| Op::Delete { author, room, id }),
        1 => (0..AGENTS, 1..12u32, 0..AGENTS).prop_map(|(author, id, to)| Op::Forward { author, id, to }),
        1 => (1..12u32, any::<bool>()).prop_map(|(id, accept)| Op::Verdict { id, accept }),
    ]
}

/// Independent statement of who may see a capsule.
fn oracle(c: &Capsule, v: &Viewer, ag: &[Viewer]) -> bool {
    if c.status == CapsuleStatus::Deleted {
        return false;
    }
    let author = ag.iter().find(|a| a.agent == c.author.agent).unwrap();
    match c.room {
        CapsuleRoom::PrivateMemory => author.lineage == v.lineage,
        CapsuleRoom::PublicMemory => true,
        CapsuleRoom::Archive => c.status == CapsuleStatus::Accepted || author.agent == v.agent,
        CapsuleRoom::Mail => author.agent == v.agent || c.recipients.iter().any(|r| r.agent == v.agent),
    }
}

proptest! {
    #[test]
    fn visibility_is_sound_and_complete(ops in prop::collection::vec(op(), 1..60)) {
        let ag = agents();
        let mut store = CapsuleStore::default();
        for (tick, op) in ops.into_iter().enumerate() {
            let tick = tick as u64;
            match op {
                Op::Create { author, room, recipients } => {
                    let room = ROOMS[room];
                    let mut n = note("t");
                    if room == CapsuleRoom::Mail {
                        n.recipients = recipients.iter().map(|&r| participant(&ag[r])).collect();
                    }
                    let _ = store.create(&ag[author], room, n, tick);
                }
                Op::Delete { author, room, id } => {
                    let _ = store.delete(&ag[author], ROOMS[room], IdItem::Capsule(id), tick);
                }
                Op::Forward { author, id, to } => {
                    let _ = store.forward(&ag[author], CapsuleRoom::Mail, id, vec![participant(&ag[to])], tick);
                }
                Op::Verdict { id, accept } => {
                    store.apply_verdict(id, accept, String::new(), tick);
                }
            }
        }
        for v in &ag {
            for room in ROOMS {
                let seen: Vec<u32> = store.visible(room, v).map(|c| c.id).collect();
                let expected: Vec<u32> =
                    store.all(room).filter(|c| oracle(c, v, &ag)).map(|c| c.id).collect();
                prop_assert_eq!(&seen, &expected);
                // Reading by id agrees with listing.
                for c in store.all(room) {
                    let read = store.read(v, room, &c.id.to_string()).unwrap();
                    let available = matches!(read[0], ReadEntry::Capsule(_));
                    prop_assert_eq!(available, expected.contains(&c.id));
                }
            }
        }
    }
}

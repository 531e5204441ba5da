//! The capsule store behind the private memory, public memory, archive, and
//! mail rooms.
//!
//! Every room keeps its own id sequence. Deletions are tombstones: a deleted
//! capsule or message disappears from listings but its id is never reused.

mod idexpr;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{FieldKind, FieldSpec};
use crate::agent::{AgentId, LineageId};
use crate::rooms::RoomId;

pub use idexpr::{parse_id_set, parse_target, IdItem, IdSet, MAX_EXPANSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapsuleRoom {
    PrivateMemory,
    PublicMemory,
    Archive,
    Mail,
}

impl CapsuleRoom {
    pub const ALL: [CapsuleRoom; 4] = [
        CapsuleRoom::PrivateMemory,
        CapsuleRoom::PublicMemory,
        CapsuleRoom::Archive,
        CapsuleRoom::Mail,
    ];

    pub fn from_room(room: RoomId) -> Option<Self> {
        Some(match room {
            RoomId::PrivateMemory => CapsuleRoom::PrivateMemory,
            RoomId::PublicMemory => CapsuleRoom::PublicMemory,
            RoomId::Archive => CapsuleRoom::Archive,
            RoomId::Mail => CapsuleRoom::Mail,
            _ => return None,
        })
    }

    pub fn room(self) -> RoomId {
        match self {
            CapsuleRoom::PrivateMemory => RoomId::PrivateMemory,
            CapsuleRoom::PublicMemory => RoomId::PublicMemory,
            CapsuleRoom::Archive => RoomId::Archive,
            CapsuleRoom::Mail => RoomId::Mail,
        }
    }

    pub fn visibility(self) -> VisibilityScope {
        match self {
            CapsuleRoom::PrivateMemory => VisibilityScope::LineageOnly,
            CapsuleRoom::PublicMemory | CapsuleRoom::Archive => VisibilityScope::AllAgents,
            CapsuleRoom::Mail => VisibilityScope::AuthorAndRecipients,
        }
    }

    pub fn create_schema(self) -> &'static [FieldSpec] {
        match self {
            CapsuleRoom::PrivateMemory => CREATE_PRIVATE,
            CapsuleRoom::PublicMemory | CapsuleRoom::Archive => CREATE_PUBLIC,
            CapsuleRoom::Mail => CREATE_MAIL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityScope {
    LineageOnly,
    AllAgents,
    AuthorAndRecipients,
}

pub const CREATE_PRIVATE: &[FieldSpec] = &[
    FieldSpec::required("title", FieldKind::Text),
    FieldSpec::required("content", FieldKind::Text),
    FieldSpec::optional("tags", FieldKind::List),
    FieldSpec::optional("abstract", FieldKind::Text),
];
pub const CREATE_PUBLIC: &[FieldSpec] = &[
    FieldSpec::required("title", FieldKind::Text),
    FieldSpec::required("content", FieldKind::Text),
    FieldSpec::required("abstract", FieldKind::Text),
    FieldSpec::optional("tags", FieldKind::List),
];
pub const CREATE_MAIL: &[FieldSpec] = &[
    FieldSpec::required("recipients", FieldKind::List),
    FieldSpec::required("title", FieldKind::Text),
    FieldSpec::required("content", FieldKind::Text),
    FieldSpec::optional("tags", FieldKind::List),
    FieldSpec::optional("abstract", FieldKind::Text),
];
pub const REPLY: &[FieldSpec] = &[
    FieldSpec::required("content", FieldKind::Text),
    FieldSpec::optional("title", FieldKind::Text),
];
pub const FORWARD: &[FieldSpec] = &[FieldSpec::required("recipients", FieldKind::List)];
pub const UPDATE: &[FieldSpec] = &[
    FieldSpec::optional("title", FieldKind::Text),
    FieldSpec::optional("tags", FieldKind::List),
    FieldSpec::optional("abstract", FieldKind::Text),
    FieldSpec::optional("content", FieldKind::Text),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapsuleStatus {
    Active,
    Deleted,
    PendingReview,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub agent: AgentId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Author {
    pub agent: AgentId,
    pub name: String,
    pub lineage: Option<LineageId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapsuleMessage {
    pub index: u32,
    pub author: Author,
    pub title: Option<String>,
    pub content: String,
    pub created_tick: u64,
    pub deleted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewNote {
    pub accepted: bool,
    pub rationale: String,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capsule {
    pub id: u32,
    pub room: CapsuleRoom,
    pub title: String,
    pub tags: Vec<String>,
    pub abstract_text: Option<String>,
    pub author: Author,
    pub recipients: Vec<Participant>,
    pub created_tick: u64,
    pub updated_tick: u64,
    pub messages: Vec<CapsuleMessage>,
    pub status: CapsuleStatus,
    pub review: Option<ReviewNote>,
    /// Review attempts so far (archive only).
    pub review_attempt: u32,
}

impl Capsule {
    pub fn is_participant(&self, agent: AgentId) -> bool {
        self.author.agent == agent || self.recipients.iter().any(|p| p.agent == agent)
    }

    pub fn live_messages(&self) -> impl Iterator<Item = &CapsuleMessage> {
        self.messages.iter().filter(|m| !m.deleted)
    }

    pub fn message_id(&self, index: u32) -> String {
        format!("{}-{}", self.id, index)
    }

    /// Pure visibility rule, ignoring room-entry restrictions.
    pub fn visible_to(&self, viewer: &Viewer) -> bool {
        if self.status == CapsuleStatus::Deleted {
            return false;
        }
        match self.room.visibility() {
            VisibilityScope::LineageOnly => viewer.lineage.is_some() && viewer.lineage == self.author.lineage,
            VisibilityScope::AllAgents => {
                self.room != CapsuleRoom::Archive
                    || self.status == CapsuleStatus::Accepted
                    || self.author.agent == viewer.agent
            }
            VisibilityScope::AuthorAndRecipients => self.is_participant(viewer.agent),
        }
    }

    fn may_edit(&self, viewer: &Viewer, msg_author: &Author) -> bool {
        if self.room == CapsuleRoom::PrivateMemory {
            viewer.lineage.is_some() && viewer.lineage == msg_author.lineage
        } else {
            msg_author.agent == viewer.agent
        }
    }
}

/// Who is asking, with the facts room-entry rules depend on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Viewer {
    pub agent: AgentId,
    pub name: String,
    pub lineage: Option<LineageId>,
    pub guest: bool,
    pub mature: bool,
}

impl Viewer {
    fn author(&self) -> Author {
        Author {
            agent: self.agent,
            name: self.name.clone(),
            lineage: self.lineage.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapsuleOp {
    Create,
    Reply,
    Forward,
    Update,
    Delete,
    Preview,
    Read,
}

impl CapsuleOp {
    fn writes(self) -> bool {
        !matches!(self, CapsuleOp::Preview | CapsuleOp::Read)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CapsuleError {
    #[error("the {0} is unavailable to guest agents")]
    GuestRestricted(&'static str),
    #[error("the {0} is restricted until you reach maturity")]
    ImmatureRestricted(&'static str),
    #[error("capsule {0} does not exist")]
    UnknownId(String),
    #[error("capsule {0} is not visible to you")]
    NotVisible(String),
    #[error("capsule {0} has been deleted")]
    DeletedCapsule(String),
    #[error("only the author may change {0}")]
    NotAuthor(String),
    #[error("you are not a participant of mail {0}")]
    NotParticipant(String),
    #[error("{0} is only available in the Mail Room")]
    WrongRoom(&'static str),
    #[error("published capsule {0} can no longer be changed")]
    Published(String),
    #[error("{0}")]
    MalformedExpression(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct NewCapsule {
    pub title: String,
    pub content: String,
    pub tags: Vec<String>,
    pub abstract_text: Option<String>,
    pub recipients: Vec<Participant>,
}

#[derive(Debug, Clone, Default)]
pub struct CapsuleChanges {
    pub title: Option<String>,
    pub tags: Option<Vec<String>>,
    pub abstract_text: Option<String>,
    pub content: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateAck {
    Capsule { id: u32, resubmitted: bool },
    Message { id: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreviewEntry {
    Available {
        id: u32,
        title: String,
        tags: Vec<String>,
        abstract_text: Option<String>,
        author: String,
        messages: usize,
        status: CapsuleStatus,
    },
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReadEntry {
    Capsule(Capsule),
    Message {
        capsule_id: u32,
        capsule_title: String,
        message: CapsuleMessage,
    },
    Unavailable(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct RoomCapsules {
    next_id: u32,
    capsules: BTreeMap<u32, Capsule>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapsuleStore {
    rooms: BTreeMap<CapsuleRoom, RoomCapsules>,
}

fn room_title(room: CapsuleRoom) -> &'static str {
    room.room().title()
}

/// Room-entry rules: guests and immature agents are kept out of some rooms
/// regardless of individual capsule visibility.
pub fn check_access(room: CapsuleRoom, viewer: &Viewer, op: CapsuleOp) -> Result<(), CapsuleError> {
    let title = room_title(room);
    match room {
        CapsuleRoom::PrivateMemory | CapsuleRoom::Archive if viewer.guest => Err(CapsuleError::GuestRestricted(title)),
        CapsuleRoom::PublicMemory if viewer.guest && op.writes() => Err(CapsuleError::GuestRestricted(title)),
        CapsuleRoom::Mail if viewer.guest && op == CapsuleOp::Forward => Err(CapsuleError::GuestRestricted(title)),
        CapsuleRoom::Archive | CapsuleRoom::PublicMemory if !viewer.mature => {
            Err(CapsuleError::ImmatureRestricted(title))
        }
        _ => Ok(()),
    }
}

impl CapsuleStore {
    fn room(&self, room: CapsuleRoom) -> Option<&RoomCapsules> {
        self.rooms.get(&room)
    }

    pub fn get(&self, room: CapsuleRoom, id: u32) -> Option<&Capsule> {
        self.room(room)?.capsules.get(&id)
    }

    pub fn get_mut(&mut self, room: CapsuleRoom, id: u32) -> Option<&mut Capsule> {
        self.rooms.get_mut(&room)?.capsules.get_mut(&id)
    }

    pub fn all(&self, room: CapsuleRoom) -> impl Iterator<Item = &Capsule> {
        self.room(room).into_iter().flat_map(|r| r.capsules.values())
    }

    pub fn visible<'a>(&'a self, room: CapsuleRoom, viewer: &'a Viewer) -> impl Iterator<Item = &'a Capsule> {
        self.all(room).filter(move |c| c.visible_to(viewer))
    }

    pub fn create(
        &mut self,
        viewer: &Viewer,
        room: CapsuleRoom,
        new: NewCapsule,
        tick: u64,
    ) -> Result<u32, CapsuleError> {
        check_access(room, viewer, CapsuleOp::Create)?;
        if matches!(room, CapsuleRoom::PublicMemory | CapsuleRoom::Archive)
            && new.abstract_text.as_deref().is_none_or(|a| a.trim().is_empty())
        {
            return Err(CapsuleError::Invalid("missing required field `abstract`".into()));
        }
        if (room == CapsuleRoom::Mail) != !new.recipients.is_empty() {
            return Err(CapsuleError::Invalid(if room == CapsuleRoom::Mail {
                "missing required field `recipients`".into()
            } else {
                "recipients are only used in the Mail Room".into()
            }));
        }
        let author = viewer.author();
        let mut recipients: Vec<Participant> = Vec::new();
        for r in new.recipients {
            if r.agent != author.agent && !recipients.iter().any(|p| p.agent == r.agent) {
                recipients.push(r);
            }
        }
        if room == CapsuleRoom::Mail && recipients.is_empty() {
            return Err(CapsuleError::Invalid(
                "mail needs at least one recipient other than yourself".into(),
            ));
        }
        let slot = self.rooms.entry(room).or_default();
        slot.next_id = slot.next_id.max(1);
        let id = slot.next_id;
        slot.next_id += 1;
        let status = if room == CapsuleRoom::Archive {
            CapsuleStatus::PendingReview
        } else {
            CapsuleStatus::Active
        };
        slot.capsules.insert(
            id,
            Capsule {
                id,
                room,
                title: new.title,
                tags: new.tags,
                abstract_text: new.abstract_text,
                author: author.clone(),
                recipients,
                created_tick: tick,
                updated_tick: tick,
                messages: vec![CapsuleMessage {
                    index: 1,
                    author,
                    title: None,
                    content: new.content,
                    created_tick: tick,
                    deleted: false,
                }],
                status,
                review: None,
                review_attempt: u32::from(room == CapsuleRoom::Archive),
            },
        );
        Ok(id)
    }

    fn visible_capsule(&mut self, viewer: &Viewer, room: CapsuleRoom, id: u32) -> Result<&mut Capsule, CapsuleError> {
        let capsule = self
            .get_mut(room, id)
            .ok_or_else(|| CapsuleError::UnknownId(id.to_string()))?;
        if capsule.status == CapsuleStatus::Deleted {
            return Err(CapsuleError::DeletedCapsule(id.to_string()));
        }
        if !capsule.visible_to(viewer) {
            return Err(CapsuleError::NotVisible(id.to_string()));
        }
        Ok(capsule)
    }

    pub fn reply(
        &mut self,
        viewer: &Viewer,
        room: CapsuleRoom,
        id: u32,
        content: String,
        title: Option<String>,
        tick: u64,
    ) -> Result<String, CapsuleError> {
        check_access(room, viewer, CapsuleOp::Reply)?;
        let capsule = self.visible_capsule(viewer, room, id)?;
        let index = capsule.messages.len() as u32 + 1;
        capsule.messages.push(CapsuleMessage {
            index,
            author: viewer.author(),
            title,
            content,
            created_tick: tick,
            deleted: false,
        });
        capsule.updated_tick = tick;
        Ok(capsule.message_id(index))
    }

    pub fn forward(
        &mut self,
        viewer: &Viewer,
        room: CapsuleRoom,
        id: u32,
        recipients: Vec<Participant>,
        tick: u64,
    ) -> Result<Vec<Participant>, CapsuleError> {
        if room != CapsuleRoom::Mail {
            return Err(CapsuleError::WrongRoom("forward"));
        }
        check_access(room, viewer, CapsuleOp::Forward)?;
        let capsule = self
            .get_mut(room, id)
            .ok_or_else(|| CapsuleError::UnknownId(id.to_string()))?;
        if capsule.status == CapsuleStatus::Deleted {
            return Err(CapsuleError::DeletedCapsule(id.to_string()));
        }
        if !capsule.is_participant(viewer.agent) {
            return Err(CapsuleError::NotParticipant(id.to_string()));
        }
        for r in recipients {
            if !capsule.is_participant(r.agent) {
                capsule.recipients.push(r);
            }
        }
        capsule.updated_tick = tick;
        Ok(capsule.recipients.clone())
    }

    pub fn update(
        &mut self,
        viewer: &Viewer,
        room: CapsuleRoom,
        target: IdItem,
        changes: CapsuleChanges,
        tick: u64,
    ) -> Result<UpdateAck, CapsuleError> {
        check_access(room, viewer, CapsuleOp::Update)?;
        let (cid, mid) = match target {
            IdItem::Capsule(c) => (c, None),
            IdItem::Message(c, m) => (c, Some(m)),
        };
        let label = target.to_string();
        let capsule = self
            .get_mut(room, cid)
            .filter(|c| c.status != CapsuleStatus::Deleted)
            .ok_or_else(|| CapsuleError::UnknownId(label.clone()))?;
        if !capsule.visible_to(viewer) {
            return Err(CapsuleError::NotVisible(label));
        }
        if capsule.status == CapsuleStatus::Accepted {
            return Err(CapsuleError::Published(label));
        }
        match mid {
            None => {
                let author = capsule.author.clone();
                if !capsule.may_edit(viewer, &author) {
                    return Err(CapsuleError::NotAuthor(label));
                }
                if changes.title.is_none() && changes.tags.is_none() && changes.abstract_text.is_none() {
                    return Err(CapsuleError::Invalid(
                        "nothing to update: give title, tags, or abstract (use a message id like 1-1 to change content)".into(),
                    ));
                }
                if let Some(t) = changes.title {
                    capsule.title = t;
                }
                if let Some(t) = changes.tags {
                    capsule.tags = t;
                }
                if let Some(a) = changes.abstract_text {
                    capsule.abstract_text = Some(a);
                }
                capsule.updated_tick = tick;
                let resubmitted = capsule.status == CapsuleStatus::Rejected;
                if resubmitted {
                    capsule.status = CapsuleStatus::PendingReview;
                    capsule.review_attempt += 1;
                }
                Ok(UpdateAck::Capsule { id: cid, resubmitted })
            }
            Some(m) => {
                let room_kind = capsule.room;
                let msg = capsule
                    .messages
                    .iter()
                    .find(|x| x.index == m && !x.deleted)
                    .ok_or_else(|| CapsuleError::UnknownId(label.clone()))?;
                let msg_author = msg.author.clone();
                let editable = if room_kind == CapsuleRoom::PrivateMemory {
                    viewer.lineage.is_some() && viewer.lineage == msg_author.lineage
                } else {
                    msg_author.agent == viewer.agent
                };
                if !editable {
                    return Err(CapsuleError::NotAuthor(label));
                }
                if changes.content.is_none() && changes.title.is_none() {
                    return Err(CapsuleError::Invalid(
                        "nothing to update: give content and/or title".into(),
                    ));
                }
                let msg = capsule
                    .messages
                    .iter_mut()
                    .find(|x| x.index == m)
                    .expect("message located above");
                if let Some(c) = changes.content {
                    msg.content = c;
                }
                if let Some(t) = changes.title {
                    msg.title = Some(t);
                }
                capsule.updated_tick = tick;
                let resubmitted = capsule.status == CapsuleStatus::Rejected;
                if resubmitted {
                    capsule.status = CapsuleStatus::PendingReview;
                    capsule.review_attempt += 1;
                }
                Ok(UpdateAck::Message { id: label })
            }
        }
    }

    pub fn delete(
        &mut self,
        viewer: &Viewer,
        room: CapsuleRoom,
        target: IdItem,
        tick: u64,
    ) -> Result<(), CapsuleError> {
        check_access(room, viewer, CapsuleOp::Delete)?;
        let label = target.to_string();
        let (cid, mid) = match target {
            IdItem::Capsule(c) => (c, None),
            IdItem::Message(c, m) => (c, Some(m)),
        };
        let capsule = self
            .get_mut(room, cid)
            .filter(|c| c.status != CapsuleStatus::Deleted)
            .ok_or_else(|| CapsuleError::UnknownId(label.clone()))?;
        if !capsule.visible_to(viewer) {
            return Err(CapsuleError::NotVisible(label));
        }
        if capsule.status == CapsuleStatus::Accepted {
            return Err(CapsuleError::Published(label));
        }
        match mid {
            None => {
                let author = capsule.author.clone();
                if !capsule.may_edit(viewer, &author) {
                    return Err(CapsuleError::NotAuthor(label));
                }
                capsule.status = CapsuleStatus::Deleted;
            }
            Some(m) => {
                let Some(pos) = capsule.messages.iter().position(|x| x.index == m && !x.deleted) else {
                    return Err(CapsuleError::UnknownId(label));
                };
                let author = capsule.messages[pos].author.clone();
                if !capsule.may_edit(viewer, &author) {
                    return Err(CapsuleError::NotAuthor(label));
                }
                capsule.messages[pos].deleted = true;
            }
        }
        capsule.updated_tick = tick;
        Ok(())
    }

    pub fn preview(&self, viewer: &Viewer, room: CapsuleRoom, expr: &str) -> Result<Vec<PreviewEntry>, CapsuleError> {
        check_access(room, viewer, CapsuleOp::Preview)?;
        let set = parse_id_set(expr).map_err(CapsuleError::MalformedExpression)?;
        let ids: Vec<u32> = match set {
            IdSet::All => self.visible(room, viewer).map(|c| c.id).collect(),
            IdSet::Items(items) => {
                let mut ids = Vec::new();
                for item in items {
                    match item {
                        IdItem::Capsule(c) => ids.push(c),
                        IdItem::Message(..) => {
                            return Err(CapsuleError::MalformedExpression(format!(
                                "preview takes capsule ids, not message id {item}"
                            )))
                        }
                    }
                }
                ids
            }
        };
        Ok(ids
            .into_iter()
            .map(|id| match self.get(room, id).filter(|c| c.visible_to(viewer)) {
                Some(c) => PreviewEntry::Available {
                    id,
                    title: c.title.clone(),
                    tags: c.tags.clone(),
                    abstract_text: c.abstract_text.clone(),
                    author: c.author.name.clone(),
                    messages: c.live_messages().count(),
                    status: c.status,
                },
                None => PreviewEntry::Unavailable(id.to_string()),
            })
            .collect())
    }

    pub fn read(&self, viewer: &Viewer, room: CapsuleRoom, expr: &str) -> Result<Vec<ReadEntry>, CapsuleError> {
        check_access(room, viewer, CapsuleOp::Read)?;
        let set = parse_id_set(expr).map_err(CapsuleError::MalformedExpression)?;
        let items: Vec<IdItem> = match set {
            IdSet::All => self.visible(room, viewer).map(|c| IdItem::Capsule(c.id)).collect(),
            IdSet::Items(items) => items,
        };
        Ok(items
            .into_iter()
            .map(|item| match item {
                IdItem::Capsule(id) => match self.get(room, id).filter(|c| c.visible_to(viewer)) {
                    Some(c) => {
                        let mut c = c.clone();
                        c.messages.retain(|m| !m.deleted);
                        ReadEntry::Capsule(c)
                    }
                    None => ReadEntry::Unavailable(item.to_string()),
                },
                IdItem::Message(cid, m) => {
                    let found = self.get(room, cid).filter(|c| c.visible_to(viewer)).and_then(|c| {
                        c.messages
                            .iter()
                            .find(|x| x.index == m && !x.deleted)
                            .map(|msg| (c, msg))
                    });
                    match found {
                        Some((c, msg)) => ReadEntry::Message {
                            capsule_id: cid,
                            capsule_title: c.title.clone(),
                            message: msg.clone(),
                        },
                        None => ReadEntry::Unavailable(item.to_string()),
                    }
                }
            })
            .collect())
    }

    /// Archive capsules awaiting a verdict, oldest first.
    pub fn pending_review(&self) -> Vec<u32> {
        self.all(CapsuleRoom::Archive)
            .filter(|c| c.status == CapsuleStatus::PendingReview)
            .map(|c| c.id)
            .collect()
    }

    pub fn apply_verdict(&mut self, id: u32, accepted: bool, rationale: String, tick: u64) -> bool {
        match self.get_mut(CapsuleRoom::Archive, id) {
            Some(c) if c.status == CapsuleStatus::PendingReview => {
                c.status = if accepted {
                    CapsuleStatus::Accepted
                } else {
                    CapsuleStatus::Rejected
                };
                c.review = Some(ReviewNote {
                    accepted,
                    rationale,
                    tick,
                });
                true
            }
            _ => false,
        }
    }
}

pub fn render_preview(entries: &[PreviewEntry]) -> String {
    if entries.is_empty() {
        return "No capsules.".into();
    }
    entries
        .iter()
        .map(|e| match e {
            PreviewEntry::Available {
                id,
                title,
                tags,
                abstract_text,
                author,
                messages,
                status,
            } => {
                let mut s = format!("#{id} {title} (by {author}, {messages} message(s)");
                if *status != CapsuleStatus::Active {
                    s.push_str(&format!(", {}", status_label(*status)));
                }
                s.push(')');
                if !tags.is_empty() {
                    s.push_str(&format!("\n  tags: {}", tags.join(", ")));
                }
                if let Some(a) = abstract_text {
                    s.push_str(&format!("\n  abstract: {a}"));
                }
                s
            }
            PreviewEntry::Unavailable(id) => format!("#{id}: unavailable"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn status_label(status: CapsuleStatus) -> &'static str {
    match status {
        CapsuleStatus::Active => "active",
        CapsuleStatus::Deleted => "deleted",
        CapsuleStatus::PendingReview => "pending review",
        CapsuleStatus::Accepted => "accepted",
        CapsuleStatus::Rejected => "rejected",
    }
}

pub fn render_capsule(c: &Capsule) -> String {
    let mut s = format!("# Capsule #{}: {}\nAuthor: {}", c.id, c.title, c.author.name);
    if !c.recipients.is_empty() {
        let names: Vec<&str> = c.recipients.iter().map(|p| p.name.as_str()).collect();
        s.push_str(&format!("\nRecipients: {}", names.join(", ")));
    }
    if !c.tags.is_empty() {
        s.push_str(&format!("\nTags: {}", c.tags.join(", ")));
    }
    if let Some(a) = &c.abstract_text {
        s.push_str(&format!("\nAbstract: {a}"));
    }
    if let Some(r) = &c.review {
        s.push_str(&format!(
            "\nReview ({}): {}",
            if r.accepted { "accepted" } else { "rejected" },
            r.rationale
        ));
    }
    for m in c.live_messages() {
        s.push_str(&format!(
            "\n\n## Message {} by {} (tick {})",
            c.message_id(m.index),
            m.author.name,
            m.created_tick
        ));
        if let Some(t) = &m.title {
            s.push_str(&format!(": {t}"));
        }
        s.push_str("\n\n");
        s.push_str(&m.content);
    }
    s
}

pub fn render_read(entries: &[ReadEntry]) -> String {
    if entries.is_empty() {
        return "No capsules.".into();
    }
    entries
        .iter()
        .map(|e| match e {
            ReadEntry::Capsule(c) => render_capsule(c),
            ReadEntry::Message {
                capsule_id,
                capsule_title,
                message,
            } => format!(
                "## Message {}-{} in #{} {} by {} (tick {})\n\n{}",
                capsule_id,
                message.index,
                capsule_id,
                capsule_title,
                message.author.name,
                message.created_tick,
                message.content
            ),
            ReadEntry::Unavailable(id) => format!("{id}: unavailable"),
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[cfg(test)]
mod tests;

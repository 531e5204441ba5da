//! Executes parsed actions against the world on behalf of one agent.
//!
//! The acting agent's record is held outside `World::agents` for the whole
//! turn, so handlers get it separately. Anything that needs the evaluation
//! pool or the backends (submissions, reflection, departure) is returned as
//! an [`Effect`] for the tick loop to carry out.

use thiserror::Error;

use super::{HelpTexts, RoomId, UnknownRoom};
use crate::action::{validate_payload, ActionInvocation, FieldKind, FieldSpec, Fields, ValidationError};
use crate::agent::context::parse_turn_range;
use crate::agent::{ActionRecord, AgentRecord, ContextError, IdentityChoice, IdentityError, MessageKind};
use crate::capsules::{
    self, parse_target, CapsuleChanges, CapsuleError, CapsuleRoom, NewCapsule, Participant, UpdateAck,
};
use crate::config::StationConfig;
use crate::kernel::world::{board_viewer_of, storage_actor_of, viewer_of, CommonMessage, OutboxRecord, World};
use crate::research::{self, ResearchError, StorageError, SubmissionDraft, Submitter, SUBMIT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoomError {
    #[error("`{verb}` is not available in the {here}; use it in the {rooms}")]
    WrongRoom {
        verb: String,
        here: &'static str,
        rooms: String,
    },
    #[error("unknown action `{0}`{1}")]
    UnknownVerb(String, String),
    #[error("the {0} is unavailable to guest agents")]
    GuestRestricted(&'static str),
    #[error("the {0} is restricted until you reach maturity")]
    ImmatureRestricted(&'static str),
    #[error(transparent)]
    Room(#[from] UnknownRoom),
    #[error(transparent)]
    Payload(#[from] ValidationError),
    #[error(transparent)]
    Capsule(#[from] CapsuleError),
    #[error(transparent)]
    Research(#[from] ResearchError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error("{0}")]
    Invalid(String),
}

/// Follow-up work for the tick loop after a successful action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    None,
    Submitted(u32),
    Reflect { prompt: String, ticks: u32 },
    Depart,
}

pub struct ActionEnv<'a> {
    pub config: &'a StationConfig,
    pub help: &'a HelpTexts,
    pub tick: u64,
    /// Context sequence number of the turn in progress.
    pub current_seq: u64,
}

const CAPSULE_VERBS: [&str; 6] = ["create", "reply", "update", "delete", "preview", "read"];

/// Rooms in which `verb` does something (empty for unknown verbs).
pub fn verb_rooms(verb: &str) -> Vec<RoomId> {
    let capsule_rooms = || {
        vec![
            RoomId::PrivateMemory,
            RoomId::PublicMemory,
            RoomId::Archive,
            RoomId::Mail,
        ]
    };
    match verb {
        "goto" | "help" => RoomId::ALL.to_vec(),
        "answer" | "name" | "inherit" => vec![RoomId::Test],
        "reflect" => vec![RoomId::Reflect],
        "forward" => vec![RoomId::Mail],
        "preview" | "read" => {
            let mut rooms = capsule_rooms();
            rooms.push(RoomId::Research);
            rooms
        }
        v if CAPSULE_VERBS.contains(&v) => capsule_rooms(),
        "speak" => vec![RoomId::Common],
        "submit" | "review" | "rank" | "filter" | "unfilter" | "page_size" | "storage" => {
            vec![RoomId::Research]
        }
        "summarize" | "prune" | "set_prompt" | "set_description" => vec![RoomId::TokenManagement],
        "message" => vec![RoomId::External],
        "confirm" => vec![RoomId::Exit],
        _ => vec![],
    }
}

const ALL_VERBS: [&str; 27] = [
    "goto",
    "help",
    "answer",
    "name",
    "inherit",
    "reflect",
    "create",
    "reply",
    "forward",
    "update",
    "delete",
    "preview",
    "read",
    "speak",
    "submit",
    "review",
    "rank",
    "filter",
    "unfilter",
    "page_size",
    "storage",
    "summarize",
    "prune",
    "set_prompt",
    "set_description",
    "message",
    "confirm",
];

fn suggestion(verb: &str) -> String {
    let best = ALL_VERBS.iter().map(|v| (strsim::levenshtein(verb, v), *v)).min();
    match best {
        Some((d, v)) if d <= 2 => format!(" (did you mean `{v}`?)"),
        _ => " (see `help` for the actions available here)".into(),
    }
}

/// Whether `agent` may enter `room`.
pub fn check_entry(agent: &AgentRecord, room: RoomId, config: &StationConfig) -> Result<(), RoomError> {
    if agent.is_guest()
        && matches!(
            room,
            RoomId::PrivateMemory
                | RoomId::Archive
                | RoomId::Common
                | RoomId::Research
                | RoomId::TokenManagement
                | RoomId::External
        )
    {
        return Err(RoomError::GuestRestricted(room.title()));
    }
    if !agent.is_mature(config.maturity_age_ticks)
        && matches!(room, RoomId::Archive | RoomId::PublicMemory | RoomId::Common)
    {
        return Err(RoomError::ImmatureRestricted(room.title()));
    }
    Ok(())
}

/// Moves the agent, queueing the room's help text on a first visit.
pub fn enter(agent: &mut AgentRecord, room: RoomId) {
    agent.location = room;
    agent.note_visit(room);
    if agent.help_seen.insert(room) && !agent.pending_help.contains(&room) {
        agent.pending_help.push(room);
    }
}

pub fn execute(
    world: &mut World,
    agent: &mut AgentRecord,
    inv: &ActionInvocation,
    env: &ActionEnv<'_>,
) -> (ActionRecord, Effect) {
    agent.note_visit(agent.location);
    let result = dispatch(world, agent, inv, env);
    let (ok, message, effect) = match result {
        Ok((message, effect)) => (true, message, effect),
        Err(e) => (false, e.to_string(), Effect::None),
    };
    (
        ActionRecord {
            verb: inv.verb.clone(),
            argument: inv.argument.clone(),
            ok,
            message,
        },
        effect,
    )
}

type Outcome = Result<(String, Effect), RoomError>;

fn done(message: impl Into<String>) -> Outcome {
    Ok((message.into(), Effect::None))
}

fn arg<'a>(inv: &'a ActionInvocation, what: &str) -> Result<&'a str, RoomError> {
    inv.argument
        .as_deref()
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| RoomError::Invalid(format!("`{}` needs {what}", inv.verb)))
}

fn fields(inv: &ActionInvocation, schema: &[FieldSpec]) -> Result<Fields, RoomError> {
    Ok(validate_payload(inv, schema)?)
}

fn dispatch(world: &mut World, agent: &mut AgentRecord, inv: &ActionInvocation, env: &ActionEnv<'_>) -> Outcome {
    let verb = inv.verb.as_str();
    match verb {
        "goto" => return goto(agent, inv, env),
        "help" => {
            let room = match inv.argument.as_deref().map(str::trim).filter(|a| !a.is_empty()) {
                Some(r) => r.parse::<RoomId>()?,
                None => agent.location,
            };
            agent.help_seen.insert(room);
            return done(env.help.render(room, env.config));
        }
        _ => {}
    }
    let rooms = verb_rooms(verb);
    if rooms.is_empty() {
        return Err(RoomError::UnknownVerb(verb.to_string(), suggestion(verb)));
    }
    let here = agent.location;
    if !rooms.contains(&here) {
        let names: Vec<&str> = rooms.iter().map(|r| r.title()).collect();
        return Err(RoomError::WrongRoom {
            verb: verb.to_string(),
            here: here.title(),
            rooms: names.join(", "),
        });
    }
    match here {
        RoomId::Test => test_room(world, agent, inv, env),
        RoomId::Reflect => reflect(inv, env),
        RoomId::PrivateMemory | RoomId::PublicMemory | RoomId::Archive | RoomId::Mail => {
            let room = CapsuleRoom::from_room(here).expect("capsule room");
            capsule_room(world, agent, room, inv, env)
        }
        RoomId::Common => {
            let text = payload_or_arg(inv, "content")?;
            world.common.push(CommonMessage {
                tick: env.tick,
                agent: agent.id,
                name: agent.display_name(),
                text,
            });
            done("Message posted to the Common Room.")
        }
        RoomId::Research => research_room(world, agent, inv, env),
        RoomId::TokenManagement => token_room(agent, inv, env),
        RoomId::External => {
            let content = payload_or_arg(inv, "content")?;
            let seq = world.outbox.len() as u32 + 1;
            world.outbox.push(OutboxRecord {
                seq,
                tick: env.tick,
                agent: agent.id,
                name: agent.display_name(),
                content,
            });
            done(format!("Message {seq} delivered to the operators' outbox."))
        }
        RoomId::Exit => match agent.pending_exit {
            Some(t) if t == env.tick || t + 1 == env.tick => {
                Ok(("Departure confirmed. Farewell.".into(), Effect::Depart))
            }
            _ => Err(RoomError::Invalid(
                "no departure is pending; `goto exit` first, then `confirm` in that turn or the next".into(),
            )),
        },
        RoomId::Lobby | RoomId::Codex => unreachable!("no room-specific verbs"),
    }
}

const CONTENT: &[FieldSpec] = &[FieldSpec::optional("content", FieldKind::Text)];

/// Text from the `content` field, falling back to the argument.
fn payload_or_arg(inv: &ActionInvocation, field: &'static str) -> Result<String, RoomError> {
    let spec = [FieldSpec::optional(field, FieldKind::Text)];
    let f = fields(inv, &spec)?;
    f.text(field)
        .map(str::to_string)
        .or_else(|| inv.argument.clone().filter(|a| !a.trim().is_empty()))
        .ok_or_else(|| RoomError::Invalid(format!("`{}` needs a `{field}` field", inv.verb)))
}

fn goto(agent: &mut AgentRecord, inv: &ActionInvocation, env: &ActionEnv<'_>) -> Outcome {
    let room: RoomId = arg(inv, "a room name")?.parse()?;
    check_entry(agent, room, env.config)?;
    enter(agent, room);
    if room == RoomId::Exit {
        agent.pending_exit = Some(env.tick);
        return done("You are at the Exit. Issue `confirm` this turn or next turn to leave for good.");
    }
    done(format!("You are now in the {}.", room.title()))
}

fn test_room(world: &mut World, agent: &mut AgentRecord, inv: &ActionInvocation, env: &ActionEnv<'_>) -> Outcome {
    match inv.verb.as_str() {
        "answer" => {
            if let Some(i) = &agent.identity {
                return Err(IdentityError::AlreadyNamed(i.display_name()).into());
            }
            let test = &env.config.entry_test;
            let payload = inv.payload.clone().unwrap_or_default();
            let answers: Vec<String> = (1..=test.questions.len())
                .map(|i| {
                    payload
                        .get(&format!("q{i}"))
                        .and_then(|v| v.scalar_text())
                        .unwrap_or_default()
                })
                .collect();
            let grade = test.grade(&answers);
            if grade.passed() {
                agent.test_passed = true;
                return done(
                    "Entry test passed. Use `name <Name>` to found a lineage or `inherit <Name>` to continue one.",
                );
            }
            let failed: Vec<String> = grade
                .per_question
                .iter()
                .enumerate()
                .filter(|(_, ok)| !**ok)
                .map(|(i, _)| format!("q{}", i + 1))
                .collect();
            Err(RoomError::Invalid(format!(
                "entry test not passed (unsatisfactory: {}); you may retake it on a later turn",
                failed.join(", ")
            )))
        }
        verb => {
            let name = arg(inv, "a lineage name")?.to_string();
            let choice = if verb == "name" {
                IdentityChoice::NewLineage(name)
            } else {
                IdentityChoice::Inherit(name)
            };
            let identity = world.lineages.establish(agent, choice, env.tick)?;
            let msg = if identity.generation == 1 {
                format!(
                    "You founded the lineage {}. You are now {}.",
                    identity.lineage_name,
                    identity.display_name()
                )
            } else {
                format!(
                    "You continue the lineage {} as its generation {}. You are now {}.",
                    identity.lineage_name,
                    identity.generation,
                    identity.display_name()
                )
            };
            done(msg)
        }
    }
}

const REFLECT: &[FieldSpec] = &[
    FieldSpec::optional("prompt", FieldKind::Text),
    FieldSpec::optional("tick", FieldKind::Int),
];

fn reflect(inv: &ActionInvocation, env: &ActionEnv<'_>) -> Outcome {
    let f = fields(inv, REFLECT)?;
    let requested = f.int("tick").unwrap_or(env.config.reflection_default_ticks as i64);
    if requested < 1 {
        return Err(RoomError::Invalid("`tick` must be at least 1".into()));
    }
    let max = env.config.reflection_max_ticks;
    let ticks = (requested.min(max as i64)) as u32;
    let prompt = f
        .text("prompt")
        .unwrap_or("Take stock of your work so far. What is going well, what is not, and what should change?")
        .to_string();
    let mut msg = format!("Reflection session of {ticks} exchange(s) started.");
    if requested > max as i64 {
        msg.push_str(&format!(" (Requested {requested}; the maximum is {max}.)"));
    }
    Ok((msg, Effect::Reflect { prompt, ticks }))
}

fn resolve_recipients(
    world: &World,
    agent: &AgentRecord,
    names: &[String],
    config: &StationConfig,
) -> Result<Vec<Participant>, RoomError> {
    let mut out = Vec::new();
    for name in names {
        let (id, display) = world
            .find_agent(name, None)
            .ok_or_else(|| RoomError::Invalid(format!("no living agent named `{name}`")))?;
        if agent.is_guest() {
            let contact = config
                .guest_mail_contact
                .as_deref()
                .ok_or_else(|| RoomError::Invalid("guests cannot send mail in this Station".into()))?;
            let allowed = world
                .lineages
                .get(&crate::agent::LineageId::from_name(contact))
                .and_then(|l| l.occupant);
            if allowed != Some(id) {
                return Err(RoomError::Invalid(format!(
                    "guests may only mail the current member of lineage {contact}"
                )));
            }
        }
        out.push(Participant {
            agent: id,
            name: display,
        });
    }
    Ok(out)
}

fn capsule_room(
    world: &mut World,
    agent: &mut AgentRecord,
    room: CapsuleRoom,
    inv: &ActionInvocation,
    env: &ActionEnv<'_>,
) -> Outcome {
    let viewer = viewer_of(agent, env.config.maturity_age_ticks);
    let tick = env.tick;
    let title = room.room().title();
    match inv.verb.as_str() {
        "create" => {
            let f = fields(inv, room.create_schema())?;
            let recipients = match f.list("recipients") {
                Some(names) if room == CapsuleRoom::Mail => resolve_recipients(world, agent, names, env.config)?,
                _ => Vec::new(),
            };
            let new = NewCapsule {
                title: f.text("title").unwrap_or_default().to_string(),
                content: f.text("content").unwrap_or_default().to_string(),
                tags: f.list("tags").map(<[String]>::to_vec).unwrap_or_default(),
                abstract_text: f.text("abstract").map(str::to_string),
                recipients,
            };
            let (cap_title, content) = (new.title.clone(), new.content.clone());
            let id = world.capsules.create(&viewer, room, new, tick)?;
            let author = agent.display_name();
            match room {
                CapsuleRoom::Mail => {
                    let recipients = world
                        .capsules
                        .get(room, id)
                        .map(|c| c.recipients.clone())
                        .unwrap_or_default();
                    for r in recipients {
                        world.notify(
                            r.agent,
                            tick,
                            MessageKind::Mail,
                            format!("New mail #{id} from {author}: {cap_title}\n\n{content}"),
                        );
                    }
                    done(format!("Mail #{id} sent."))
                }
                CapsuleRoom::PublicMemory => {
                    world.broadcast(
                        tick,
                        MessageKind::Announcement,
                        &format!("{author} started a new thread in the Public Memory Room: #{id} {cap_title}"),
                        Some(agent.id),
                    );
                    done(format!("Capsule #{id} created in the {title}."))
                }
                CapsuleRoom::Archive => done(format!(
                    "Paper #{id} submitted to the {title}. The reviewer's verdict arrives as a system message."
                )),
                CapsuleRoom::PrivateMemory => done(format!("Capsule #{id} created in the {title}.")),
            }
        }
        "reply" => {
            let id = capsule_id(arg(inv, "a capsule id")?)?;
            let f = fields(inv, capsules::REPLY)?;
            let content = f.text("content").unwrap_or_default().to_string();
            let msg_id = world.capsules.reply(
                &viewer,
                room,
                id,
                content.clone(),
                f.text("title").map(str::to_string),
                tick,
            )?;
            if room == CapsuleRoom::Mail {
                if let Some(c) = world.capsules.get(room, id).cloned() {
                    let author = agent.display_name();
                    let others = std::iter::once(c.author.agent)
                        .chain(c.recipients.iter().map(|p| p.agent))
                        .filter(|a| *a != agent.id);
                    for other in others {
                        world.notify(
                            other,
                            tick,
                            MessageKind::Mail,
                            format!("{author} replied to mail #{id} ({}):\n\n{content}", c.title),
                        );
                    }
                }
            }
            done(format!("Message {msg_id} added."))
        }
        "forward" => {
            let id = capsule_id(arg(inv, "a capsule id")?)?;
            let f = fields(inv, capsules::FORWARD)?;
            let wanted = resolve_recipients(world, agent, f.list("recipients").unwrap_or_default(), env.config)?;
            let before: Vec<_> = world
                .capsules
                .get(room, id)
                .map(|c| c.recipients.iter().map(|p| p.agent).collect())
                .unwrap_or_default();
            let after = world.capsules.forward(&viewer, room, id, wanted, tick)?;
            let c = world.capsules.get(room, id).cloned().expect("forwarded capsule");
            let added: Vec<Participant> = after.into_iter().filter(|p| !before.contains(&p.agent)).collect();
            let author = agent.display_name();
            for p in &added {
                world.notify(
                    p.agent,
                    tick,
                    MessageKind::Mail,
                    format!(
                        "{author} forwarded mail #{id} ({}) to you. Read it in the Mail Room.",
                        c.title
                    ),
                );
            }
            let names: Vec<&str> = added.iter().map(|p| p.name.as_str()).collect();
            done(if names.is_empty() {
                "Everyone listed was already a participant.".to_string()
            } else {
                format!("Mail #{id} forwarded to {}.", names.join(", "))
            })
        }
        "update" => {
            let target = parse_target(arg(inv, "a capsule or message id")?)
                .ok_or_else(|| RoomError::Invalid("expected an id such as `3` or `3-2`".into()))?;
            let f = fields(inv, capsules::UPDATE)?;
            let changes = CapsuleChanges {
                title: f.text("title").map(str::to_string),
                tags: f.list("tags").map(<[String]>::to_vec),
                abstract_text: f.text("abstract").map(str::to_string),
                content: f.text("content").map(str::to_string),
            };
            match world.capsules.update(&viewer, room, target, changes, tick)? {
                UpdateAck::Capsule { id, resubmitted: true } => {
                    done(format!("Paper #{id} updated and resubmitted for review."))
                }
                UpdateAck::Capsule { id, .. } => done(format!("Capsule #{id} updated.")),
                UpdateAck::Message { id } => done(format!("Message {id} updated.")),
            }
        }
        "delete" => {
            let target = parse_target(arg(inv, "a capsule or message id")?)
                .ok_or_else(|| RoomError::Invalid("expected an id such as `3` or `3-2`".into()))?;
            world.capsules.delete(&viewer, room, target, tick)?;
            done(format!("{target} deleted."))
        }
        "preview" => {
            let expr = inv
                .argument
                .as_deref()
                .filter(|a| !a.trim().is_empty())
                .unwrap_or("all");
            done(capsules::render_preview(&world.capsules.preview(&viewer, room, expr)?))
        }
        "read" => {
            let expr = arg(inv, "capsule ids (for example `1`, `2-3`, or `all`)")?;
            done(capsules::render_read(&world.capsules.read(&viewer, room, expr)?))
        }
        other => unreachable!("verb {other} routed to a capsule room"),
    }
}

fn capsule_id(s: &str) -> Result<u32, RoomError> {
    s.trim()
        .trim_start_matches('#')
        .parse()
        .map_err(|_| RoomError::Invalid(format!("`{s}` is not a capsule id")))
}

fn research_room(world: &mut World, agent: &mut AgentRecord, inv: &ActionInvocation, env: &ActionEnv<'_>) -> Outcome {
    let bv = board_viewer_of(agent, env.config.maturity_age_ticks);
    match inv.verb.as_str() {
        "read" => {
            let id: u32 = arg(inv, "a task id")?
                .trim_start_matches('#')
                .parse()
                .map_err(|_| RoomError::Invalid("task ids are numbers".into()))?;
            let task = world.board.task(id)?;
            let mut text = format!("# Task {}: {}\n\n{}", task.id, task.title, task.description.trim_end());
            if !task.signature.is_empty() {
                text.push_str(&format!("\n\nEntry point: {}", task.signature));
            }
            if !task.baseline_refs.is_empty() {
                text.push_str(&format!("\n\nBaselines: {}", task.baseline_refs.join(", ")));
            }
            agent.read_tasks.insert(id);
            done(text)
        }
        "submit" => {
            let task_id = match inv.argument.as_deref().map(str::trim).filter(|a| !a.is_empty()) {
                Some(a) => Some(
                    a.trim_start_matches('#')
                        .parse::<u32>()
                        .map_err(|_| RoomError::Invalid("task ids are numbers".into()))?,
                ),
                None => None,
            };
            let f = fields(inv, SUBMIT)?;
            let draft = SubmissionDraft::from_fields(&f)?;
            let who = Submitter {
                agent: agent.id,
                name: agent.display_name(),
                lineage: agent.lineage().cloned(),
                read_tasks: &agent.read_tasks,
            };
            let id = world
                .board
                .submit(&who, task_id, draft, env.config.eval_concurrency_per_agent, env.tick)?;
            let task = world.board.get(id).map(|s| s.task_id).unwrap_or_default();
            Ok((
                format!("Evaluation #{id} submitted for task {task}. The result arrives as a system message."),
                Effect::Submitted(id),
            ))
        }
        "review" => {
            let id: u32 = arg(inv, "an evaluation id")?
                .trim_start_matches('#')
                .parse()
                .map_err(|_| RoomError::Invalid("evaluation ids are numbers".into()))?;
            done(world.board.review(&bv, id)?.render_review())
        }
        "rank" => {
            let ordering = arg(inv, "`id`, `score`, or `author`")?
                .parse()
                .map_err(RoomError::Invalid)?;
            agent.leaderboard.ordering = ordering;
            done(format!("Leaderboard now sorted by {}.", arg(inv, "")?.to_lowercase()))
        }
        "filter" => {
            let tag = arg(inv, "a tag")?.to_string();
            let msg = format!("Leaderboard filtered to tag `{tag}`.");
            agent.leaderboard.filter = Some(tag);
            done(msg)
        }
        "unfilter" => {
            agent.leaderboard.filter = None;
            done("Leaderboard filter cleared.")
        }
        "page_size" => {
            let n: usize = arg(inv, "a number")?
                .parse()
                .map_err(|_| RoomError::Research(ResearchError::BadPageSize))?;
            agent.leaderboard.set_page_size(n)?;
            done(format!("Leaderboard page size set to {n}."))
        }
        "preview" => {
            let expr = inv
                .argument
                .as_deref()
                .filter(|a| !a.trim().is_empty())
                .unwrap_or("all");
            done(research::render_preview(&research::preview(&world.board, &bv, expr)?))
        }
        "storage" => storage(world, agent, inv, env),
        other => unreachable!("verb {other} routed to the research counter"),
    }
}

fn storage(world: &mut World, agent: &AgentRecord, inv: &ActionInvocation, env: &ActionEnv<'_>) -> Outcome {
    let actor = storage_actor_of(agent);
    let raw = arg(inv, "a subcommand: info, list, read, write, or delete")?;
    let mut parts = raw.split_whitespace();
    let sub = parts.next().unwrap_or_default().to_lowercase();
    let path = parts.next();
    let need_path = || path.ok_or_else(|| RoomError::Invalid(format!("`storage {sub}` needs a path")));
    match sub.as_str() {
        "info" => done(world.storage.info(&actor)),
        "list" => {
            let page = match parts.next() {
                Some(p) => p
                    .parse()
                    .map_err(|_| RoomError::Invalid(format!("`{p}` is not a page number")))?,
                None => 1,
            };
            done(world.storage.list(need_path()?, page)?.render())
        }
        "read" => {
            let file = world.storage.read(need_path()?)?;
            done(file.content.clone())
        }
        "write" => {
            let path = need_path()?;
            let f = fields(inv, CONTENT)?;
            let content = f
                .text("content")
                .ok_or_else(|| RoomError::Invalid("`storage write` needs a `content` field".into()))?;
            let bytes = content.len();
            let full = world.storage.write(&actor, path, content.to_string(), env.tick)?;
            done(format!("Wrote {bytes} bytes to {full}."))
        }
        "delete" => {
            let full = world.storage.delete(&actor, need_path()?)?;
            done(format!("Deleted {full}."))
        }
        other => Err(RoomError::Invalid(format!(
            "unknown storage subcommand `{other}` (use info, list, read, write, or delete)"
        ))),
    }
}

const SUMMARY: &[FieldSpec] = &[FieldSpec::required("summary", FieldKind::Text)];

fn token_room(agent: &mut AgentRecord, inv: &ActionInvocation, env: &ActionEnv<'_>) -> Outcome {
    match inv.verb.as_str() {
        "summarize" => {
            let (a, b) = parse_turn_range(arg(inv, "a turn range such as 1:40")?)?;
            let f = fields(inv, SUMMARY)?;
            let u = agent
                .context
                .summarize(a, b, f.text("summary").unwrap_or_default(), env.current_seq)?;
            done(format!(
                "Summarized {} entries; stored context {} -> {} bytes.",
                u.removed_entries, u.bytes_before, u.bytes_after
            ))
        }
        "prune" => {
            let (a, b) = parse_turn_range(arg(inv, "a turn range such as 1:40")?)?;
            let u = agent.context.prune(a, b, env.current_seq)?;
            done(format!(
                "Pruned {} entries; stored context {} -> {} bytes.",
                u.removed_entries, u.bytes_before, u.bytes_after
            ))
        }
        "set_prompt" => {
            let f = fields(inv, CONTENT)?;
            agent.meta_prompt = f.text("content").map(str::to_string);
            done(if agent.meta_prompt.is_some() {
                "Meta prompt set."
            } else {
                "Meta prompt cleared."
            })
        }
        "set_description" => {
            let f = fields(inv, CONTENT)?;
            agent.description = f.text("content").unwrap_or_default().to_string();
            done("Description updated.")
        }
        other => unreachable!("verb {other} routed to token management"),
    }
}

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{SecondsFormat, Utc};
use qrec_core::embedding::SemanticSpace;
use qrec_core::exec::{execute, recommend_chart};
use qrec_core::recommender::{RecommendationSet, Recommender, RecommenderConfig};
use qrec_core::reference::ReferenceRepository;
use qrec_core::schema::{schema_from_connection, SchemaCatalog};
use qrec_core::{parse_sql, render_nl, synthesize_sql, QueryIR};
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

use crate::config::{DatabaseConfig, ServiceConfig};
use crate::model::{explain, validate_cells, Dashboard, DashboardCell, HistoryEntry, Session};
use crate::store::{Event, EventLog};
use crate::ServiceError;

/// What a client submits: raw SQL or the position of a served recommendation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryInput {
    Sql { sql: String },
    Recommendation { recommendation_index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session: Session,
    pub recommendations: RecommendationSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submitted {
    pub entry: HistoryEntry,
    pub recommendations: RecommendationSet,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatabaseSummary {
    pub id: String,
    pub catalog: SchemaCatalog,
}

struct Database {
    config: DatabaseConfig,
    catalog: SchemaCatalog,
}

impl Database {
    fn connect(&self) -> Result<Connection, ServiceError> {
        Connection::open_with_flags(&self.config.path, OpenFlags::SQLITE_OPEN_READ_ONLY)
            .map_err(|e| ServiceError::Execution(format!("{}: {e}", self.config.path.display())))
    }
}

struct SessionState {
    session: Session,
    conn: Connection,
    /// Last set served to the client; `None` until first requested.
    served: Option<RecommendationSet>,
}

/// Exploration sessions over registered databases.
///
/// Calls on different sessions run concurrently; calls on one session are
/// serialized by its lock.
pub struct SessionService {
    databases: BTreeMap<String, Database>,
    repository: ReferenceRepository,
    space: SemanticSpace,
    config: RecommenderConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
    dashboards: RwLock<BTreeMap<String, Dashboard>>,
    log: Mutex<EventLog>,
    next_session: AtomicU64,
    next_dashboard: AtomicU64,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn sequence_of(id: &str) -> u64 {
    id.rsplit('-')
        .next()
        .and_then(|n| n.parse().ok())
        .unwrap_or(0)
}

impl SessionService {
    /// Loads the databases and references named in `config` and replays the
    /// event log.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let repository = match &config.reference_log {
            Some(log) => ReferenceRepository::load_any(log, config.reference_schemas.as_deref())
                .map_err(|e| ServiceError::Config(e.to_string()))?,
            None => ReferenceRepository::default(),
        };
        let embedder = config
            .embedder
            .build()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        SessionService::new(
            config.databases.clone(),
            repository,
            SemanticSpace::new(embedder),
            config.recommender.clone(),
            EventLog::open(&config.storage)?,
        )
    }

    pub fn new(
        databases: Vec<DatabaseConfig>,
        repository: ReferenceRepository,
        space: SemanticSpace,
        config: RecommenderConfig,
        (log, events): (EventLog, Vec<Event>),
    ) -> Result<Self, ServiceError> {
        config
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        let mut dbs = BTreeMap::new();
        for d in databases {
            let conn = Connection::open_with_flags(&d.path, OpenFlags::SQLITE_OPEN_READ_ONLY)
                .map_err(|e| ServiceError::Config(format!("{}: {e}", d.path.display())))?;
            let label = d.domain_label.clone().unwrap_or_else(|| {
                d.path
                    .file_stem()
                    .map(|s| qrec_core::schema::humanize(&s.to_string_lossy()))
                    .unwrap_or_default()
            });
            let catalog = schema_from_connection(&conn, &label)
                .map_err(|e| ServiceError::Config(format!("{}: {e}", d.path.display())))?;
            if dbs
                .insert(d.id.clone(), Database { config: d, catalog })
                .is_some()
            {
                return Err(ServiceError::Config("duplicate database id".into()));
            }
        }
        let service = SessionService {
            databases: dbs,
            repository,
            space,
            config,
            sessions: RwLock::new(HashMap::new()),
            dashboards: RwLock::new(BTreeMap::new()),
            log: Mutex::new(log),
            next_session: AtomicU64::new(1),
            next_dashboard: AtomicU64::new(1),
        };
        service.replay(events)?;
        Ok(service)
    }

    fn replay(&self, events: Vec<Event>) -> Result<(), ServiceError> {
        let mut sessions = self.sessions.write().expect("session table");
        let mut dashboards = self.dashboards.write().expect("dashboard table");
        for ev in events {
            match ev {
                Event::SessionCreated {
                    session_id,
                    database_id,
                    created_at,
                } => {
                    let db = self.database(&database_id)?;
                    let state = SessionState {
                        session: Session {
                            id: session_id.clone(),
                            database_id,
                            created_at,
                            history: Vec::new(),
                        },
                        conn: db.connect()?,
                        served: None,
                    };
                    self.next_session
                        .fetch_max(sequence_of(&session_id) + 1, Ordering::SeqCst);
                    sessions.insert(session_id, Arc::new(Mutex::new(state)));
                }
                Event::EntryAppended { session_id, entry } => {
                    let state = sessions.get(&session_id).ok_or_else(|| {
                        ServiceError::Storage(format!("entry for unknown session {session_id}"))
                    })?;
                    state
                        .lock()
                        .expect("session lock")
                        .session
                        .history
                        .push(*entry);
                }
                Event::DashboardSaved { dashboard } => {
                    self.next_dashboard
                        .fetch_max(sequence_of(&dashboard.id) + 1, Ordering::SeqCst);
                    dashboards.insert(dashboard.id.clone(), dashboard);
                }
            }
        }
        Ok(())
    }

    fn database(&self, id: &str) -> Result<&Database, ServiceError> {
        self.databases
            .get(id)
            .ok_or_else(|| ServiceError::UnknownDatabase(id.to_string()))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionState>>, ServiceError> {
        self.sessions
            .read()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    fn append(&self, event: &Event) -> Result<(), ServiceError> {
        self.log.lock().expect("log lock").append(event)
    }

    pub fn databases(&self) -> Vec<DatabaseSummary> {
        self.databases
            .iter()
            .map(|(id, d)| DatabaseSummary {
                id: id.clone(),
                catalog: d.catalog.clone(),
            })
            .collect()
    }

    pub fn repository(&self) -> &ReferenceRepository {
        &self.repository
    }

    /// Recommendations for a history ordered oldest first.
    fn recommend(
        &self,
        catalog: &SchemaCatalog,
        history: &[HistoryEntry],
    ) -> Result<RecommendationSet, ServiceError> {
        let recent_first: Vec<QueryIR> = history.iter().rev().map(|e| e.query.clone()).collect();
        let r = Recommender::new(&self.space, catalog, &self.repository, self.config.clone())
            .map_err(|e| ServiceError::Recommendation(e.to_string()))?;
        r.recommend_next(&recent_first)
            .map_err(|e| ServiceError::Recommendation(e.to_string()))
    }

    pub fn create_session(&self, database_id: &str) -> Result<SessionCreated, ServiceError> {
        let db = self.database(database_id)?;
        let recommendations = self.recommend(&db.catalog, &[])?;
        let n = self.next_session.fetch_add(1, Ordering::SeqCst);
        let session = Session {
            id: format!("session-{n}"),
            database_id: database_id.to_string(),
            created_at: now(),
            history: Vec::new(),
        };
        let conn = db.connect()?;
        self.append(&Event::SessionCreated {
            session_id: session.id.clone(),
            database_id: session.database_id.clone(),
            created_at: session.created_at.clone(),
        })?;
        let state = SessionState {
            session: session.clone(),
            conn,
            served: Some(recommendations.clone()),
        };
        self.sessions
            .write()
            .expect("session table")
            .insert(session.id.clone(), Arc::new(Mutex::new(state)));
        Ok(SessionCreated {
            session,
            recommendations,
        })
    }

    pub fn submit_query(
        &self,
        session_id: &str,
        input: &QueryInput,
    ) -> Result<Submitted, ServiceError> {
        let handle = self.session(session_id)?;
        let mut state = handle.lock().expect("session lock");
        let catalog = &self.database(&state.session.database_id)?.catalog;
        let query = match input {
            QueryInput::Sql { sql } => parse_sql(sql, catalog).map_err(ServiceError::from)?,
            QueryInput::Recommendation {
                recommendation_index,
            } => {
                if state.served.is_none() {
                    state.served = Some(self.recommend(catalog, &state.session.history)?);
                }
                let served = state.served.as_ref().expect("just filled");
                served
                    .items
                    .get(*recommendation_index)
                    .map(|r| r.query.clone())
                    .ok_or(ServiceError::StaleRecommendationIndex {
                        index: *recommendation_index,
                        available: served.items.len(),
                    })?
            }
        };
        let result =
            execute(&query, &state.conn).map_err(|e| ServiceError::Execution(e.to_string()))?;
        let chart = recommend_chart(&result);
        let entry = HistoryEntry {
            index: state.session.history.len(),
            sql: synthesize_sql(&query),
            nl_text: render_nl(&query, catalog),
            explanation: explain(&query, catalog),
            vega_lite: chart.to_vega_lite(),
            query,
            result,
            chart,
            submitted_at: now(),
        };
        self.append(&Event::EntryAppended {
            session_id: session_id.to_string(),
            entry: Box::new(entry.clone()),
        })?;
        state.session.history.push(entry.clone());
        let recommendations = self.recommend(catalog, &state.session.history)?;
        state.served = Some(recommendations.clone());
        Ok(Submitted {
            entry,
            recommendations,
        })
    }

    /// The set a recommendation index refers to, computing it if none has
    /// been served yet.
    pub fn recommendations(&self, session_id: &str) -> Result<RecommendationSet, ServiceError> {
        let handle = self.session(session_id)?;
        let mut state = handle.lock().expect("session lock");
        if state.served.is_none() {
            let catalog = &self.database(&state.session.database_id)?.catalog;
            state.served = Some(self.recommend(catalog, &state.session.history)?);
        }
        Ok(state.served.clone().expect("just filled"))
    }

    pub fn get_session(&self, session_id: &str) -> Result<Session, ServiceError> {
        let handle = self.session(session_id)?;
        let state = handle.lock().expect("session lock");
        Ok(state.session.clone())
    }

    pub fn history(&self, session_id: &str) -> Result<Vec<HistoryEntry>, ServiceError> {
        Ok(self.get_session(session_id)?.history)
    }

    /// A stored entry, unchanged and not re-executed.
    pub fn restore(&self, session_id: &str, index: usize) -> Result<HistoryEntry, ServiceError> {
        let handle = self.session(session_id)?;
        let state = handle.lock().expect("session lock");
        state
            .session
            .history
            .get(index)
            .cloned()
            .ok_or(ServiceError::IndexOutOfRange {
                index,
                len: state.session.history.len(),
            })
    }

    pub fn save_dashboard(
        &self,
        session_id: &str,
        cells: Vec<DashboardCell>,
    ) -> Result<Dashboard, ServiceError> {
        let handle = self.session(session_id)?;
        let state = handle.lock().expect("session lock");
        validate_cells(&cells, state.session.history.len())?;
        let n = self.next_dashboard.fetch_add(1, Ordering::SeqCst);
        let dashboard = Dashboard {
            id: format!("dashboard-{n}"),
            session_id: session_id.to_string(),
            cells,
        };
        self.append(&Event::DashboardSaved {
            dashboard: dashboard.clone(),
        })?;
        self.dashboards
            .write()
            .expect("dashboard table")
            .insert(dashboard.id.clone(), dashboard.clone());
        Ok(dashboard)
    }

    pub fn load_dashboard(&self, id: &str) -> Result<Dashboard, ServiceError> {
        self.dashboards
            .read()
            .expect("dashboard table")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownDashboard(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .expect("session table")
            .keys()
            .cloned()
            .collect();
        ids.sort_by_key(|id| sequence_of(id));
        ids
    }
}

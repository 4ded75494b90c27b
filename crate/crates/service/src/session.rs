use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use latorg::personalize::PersonalizedModel;
use latorg::toyface::Image;

use crate::error::ApiError;

/// Remembered ids of evicted or expired sessions, so late requests get 410.
const TOMBSTONES: usize = 4096;

/// One inversion session. `model` shares the base anchors and basis but
/// carries the session's own pivot-tuned generator.
#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub model: PersonalizedModel<f64>,
    pub image: Image,
    pub latent: Vec<f64>,
    pub created: Instant,
}

pub type SharedSession = Arc<Mutex<Session>>;

struct Entry {
    session: SharedSession,
    last_used: Instant,
}

/// Bounded session table with idle expiry and least-recently-used eviction.
pub struct Registry {
    entries: HashMap<String, Entry>,
    gone: HashSet<String>,
    gone_order: VecDeque<String>,
    capacity: usize,
    idle: Duration,
}

impl Registry {
    pub fn new(capacity: usize, idle: Duration) -> Self {
        Self {
            entries: HashMap::new(),
            gone: HashSet::new(),
            gone_order: VecDeque::new(),
            capacity: capacity.max(1),
            idle,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn bury(&mut self, id: String) {
        self.entries.remove(&id);
        if self.gone.insert(id.clone()) {
            self.gone_order.push_back(id);
        }
        while self.gone_order.len() > TOMBSTONES {
            if let Some(old) = self.gone_order.pop_front() {
                self.gone.remove(&old);
            }
        }
    }

    fn expire(&mut self, now: Instant) {
        let stale: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, e)| now.duration_since(e.last_used) > self.idle)
            .map(|(id, _)| id.clone())
            .collect();
        for id in stale {
            self.bury(id);
        }
    }

    pub fn insert(&mut self, session: Session, now: Instant) {
        self.expire(now);
        while self.entries.len() >= self.capacity {
            let oldest = self
                .entries
                .iter()
                .min_by_key(|(_, e)| e.last_used)
                .map(|(id, _)| id.clone())
                .expect("non-empty table");
            log::debug!("evicting session {oldest}");
            self.bury(oldest);
        }
        let id = session.id.clone();
        self.entries.insert(
            id,
            Entry {
                session: Arc::new(Mutex::new(session)),
                last_used: now,
            },
        );
    }

    /// Looks up a live session and marks it used.
    pub fn get(&mut self, id: &str, now: Instant) -> Result<SharedSession, ApiError> {
        self.expire(now);
        match self.entries.get_mut(id) {
            Some(e) => {
                e.last_used = now;
                Ok(e.session.clone())
            }
            None if self.gone.contains(id) => Err(ApiError::expired_session(id)),
            None => Err(ApiError::unknown_session(id)),
        }
    }
}

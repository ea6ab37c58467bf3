use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::ingest::Session;

/// Sessions re-encoded as dense tool and user ids.
pub(crate) struct Encoded {
    pub tools: Vec<Arc<str>>,
    /// Sorted user universe.
    pub users: Arc<[Arc<str>]>,
    pub sessions: Vec<Vec<u32>>,
    pub session_user: Vec<u32>,
}

impl Encoded {
    pub fn new(sessions: &[Session]) -> Self {
        let users: BTreeSet<&str> = sessions.iter().map(|s| s.user_id.as_str()).collect();
        let users: Arc<[Arc<str>]> = users.into_iter().map(Arc::from).collect();
        let user_index: HashMap<&str, u32> = users
            .iter()
            .enumerate()
            .map(|(i, u)| (&**u, i as u32))
            .collect();

        let mut tool_index: HashMap<&str, u32> = HashMap::new();
        let mut tools: Vec<Arc<str>> = Vec::new();
        let mut encoded = Vec::with_capacity(sessions.len());
        let mut session_user = Vec::with_capacity(sessions.len());
        for session in sessions {
            let ids = session
                .events
                .iter()
                .map(|e| {
                    *tool_index.entry(e.tool_id.as_str()).or_insert_with(|| {
                        tools.push(Arc::from(e.tool_id.as_str()));
                        (tools.len() - 1) as u32
                    })
                })
                .collect();
            encoded.push(ids);
            session_user.push(user_index[session.user_id.as_str()]);
        }
        Encoded {
            tools,
            users,
            sessions: encoded,
            session_user,
        }
    }

    pub fn tool_names(&self, ids: &[u32]) -> Vec<Arc<str>> {
        ids.iter()
            .map(|&t| self.tools[t as usize].clone())
            .collect()
    }
}

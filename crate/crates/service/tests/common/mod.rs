#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::thread::JoinHandle;

use chrono::{TimeZone, Utc};
use classifieds_core::ManualClock;
use classifieds_service::{server, OpenOptions, Service, ServiceConfig};
use serde_json::Value;
use tempfile::TempDir;

pub const EVENT_XML: &str = r#"<schema id="O198" category="event" creator="admin">
	<field input-type="textbox"  data-type="text"
	visibility-in-search-filter="true">Title</field>
	<field data-type="date-time">Date and Time</field>
</schema>"#;

pub const FORSALE_XML: &str = r#"<schema id="S100" category="forsale" creator="admin">
  <field visibility-in-search-filter="true">Title</field>
  <field data-type="currency" visibility-in-search-filter="true">Price</field>
  <field input-type="textarea">Condition</field>
</schema>"#;

pub const NETWORKS: &str = "jhu\tJohns Hopkins\tjhu.edu\numd\tMaryland\tumd.edu\n";

pub struct Env {
    pub dir: TempDir,
    pub config: ServiceConfig,
    pub clock: Arc<ManualClock>,
}

pub fn env() -> Env {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::create_dir(root.join("schemas")).unwrap();
    fs::write(root.join("schemas/event.xml"), EVENT_XML).unwrap();
    fs::write(root.join("schemas/forsale.xml"), FORSALE_XML).unwrap();
    fs::write(root.join("networks.tsv"), NETWORKS).unwrap();
    fs::write(root.join("synonyms.txt"), "bike: bicycle\n").unwrap();
    let mut config = ServiceConfig::new(root.join("data"), root.join("schemas"), root.join("networks.tsv"));
    config.synonym_table_path = Some(root.join("synonyms.txt"));
    config.password_iterations = 1;
    config.fsync = false;
    config.flush_interval_ms = 20;
    config.base_url = "http://market.test".into();
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2024, 3, 1, 12, 0, 0).unwrap()));
    Env { dir, config, clock }
}

impl Env {
    pub fn open(&self) -> Service {
        Service::open_with(
            self.config.clone(),
            OpenOptions {
                clock: Some(self.clock.clone()),
                rng_seed: None,
            },
        )
        .unwrap()
    }

    pub fn start(&self) -> Running {
        Running::start(Arc::new(self.open()))
    }

    pub fn outbox(&self) -> std::path::PathBuf {
        self.config.outbox_dir()
    }
}

/// Verification link for `email` found in the outbox.
pub fn verification_token(outbox: &Path, email: &str) -> Option<String> {
    let mut found = None;
    for entry in fs::read_dir(outbox).ok()? {
        let text = fs::read_to_string(entry.ok()?.path()).ok()?;
        if text.contains(&format!("To: {email}")) {
            if let Some(pos) = text.find("/verify/") {
                let rest = &text[pos + "/verify/".len()..];
                found = Some(rest.chars().take_while(|c| c.is_ascii_hexdigit()).collect());
            }
        }
    }
    found
}

pub struct Running {
    pub base: String,
    pub service: Arc<Service>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Running {
    pub fn start(service: Arc<Service>) -> Running {
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let svc = service.clone();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                server::serve(svc, listener, async {
                    let _ = stop_rx.await;
                })
                .await
                .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        Running {
            base: format!("http://{addr}"),
            service,
            shutdown: Some(stop_tx),
            thread: Some(thread),
        }
    }

    pub fn client(&self) -> Client {
        Client::new(&self.base)
    }

    /// Stops the server and hands back the service.
    pub fn stop(mut self) -> Arc<Service> {
        self.halt();
        self.service.clone()
    }

    fn halt(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            t.join().unwrap();
        }
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        self.halt();
    }
}

pub struct Client {
    base: String,
    agent: ureq::Agent,
    pub token: Option<String>,
}

impl Client {
    pub fn new(base: &str) -> Client {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .max_idle_connections(0)
            .build()
            .into();
        Client {
            base: base.to_string(),
            agent,
            token: None,
        }
    }

    pub fn with_token(&self, token: Option<String>) -> Client {
        Client {
            base: self.base.clone(),
            agent: self.agent.clone(),
            token,
        }
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, Value) {
        let mut resp = resp.unwrap();
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        let value = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap() };
        (status, value)
    }

    fn auth(&self) -> Option<String> {
        self.token.as_ref().map(|t| format!("Bearer {t}"))
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        if let Some(a) = self.auth() {
            req = req.header("Authorization", a);
        }
        Self::finish(req.call())
    }

    pub fn delete(&self, path: &str) -> (u16, Value) {
        let mut req = self.agent.delete(format!("{}{path}", self.base));
        if let Some(a) = self.auth() {
            req = req.header("Authorization", a);
        }
        Self::finish(req.call())
    }

    pub fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut req = self.agent.post(format!("{}{path}", self.base));
        if let Some(a) = self.auth() {
            req = req.header("Authorization", a);
        }
        Self::finish(req.send_json(&body))
    }

    pub fn patch(&self, path: &str, body: Value) -> (u16, Value) {
        let mut req = self.agent.patch(format!("{}{path}", self.base));
        if let Some(a) = self.auth() {
            req = req.header("Authorization", a);
        }
        Self::finish(req.send_json(&body))
    }

    /// Registers, verifies through the mailed link and signs in.
    pub fn sign_up(&self, service: &Service, outbox: &Path, username: &str, email: &str) -> Client {
        let (status, body) = self.post(
            "/auth/register",
            serde_json::json!({
                "email": email,
                "username": username,
                "password": "correct horse",
                "full_name": format!("Full {username}"),
                "home_location": {"lat": 39.2904, "lon": -76.6122},
            }),
        );
        assert_eq!(status, 201, "{body}");
        service.flush_notifications().unwrap();
        let token = verification_token(outbox, email).expect("verification mail");
        let (status, body) = self.get(&format!("/verify/{token}"));
        assert_eq!(status, 200, "{body}");
        let (status, body) = self.post("/auth/login", serde_json::json!({"login": username, "password": "correct horse"}));
        assert_eq!(status, 200, "{body}");
        self.with_token(Some(body["session_token"].as_str().unwrap().to_string()))
    }
}

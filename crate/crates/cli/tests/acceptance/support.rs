use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use classifieds_core::ManualClock;
use classifieds_service::{OpenOptions, Service, ServiceConfig};
use serde_json::Value;
use tempfile::TempDir;

pub const BIN: &str = env!("CARGO_BIN_EXE_classifieds");
pub const SEED_PASSWORD: &str = "seed-password";

pub const STOPWORDS: &str = "an\nand\nare\nat\nbe\nby\nfor\nfrom\nin\nis\nit\nof\non\nor\nthe\nto\nwith\ngreat\nmust\n";
pub const SYNONYMS: &str = "bike: bicycle, cycle\nsofa: couch\nlaptop: notebook\napartment: flat, sublet\nlamp: light\n";

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

/// A private copy of the demo schemas and networks plus a config file.
pub struct Site {
    pub dir: TempDir,
    pub config: ServiceConfig,
    pub config_path: PathBuf,
}

pub fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

impl Site {
    pub fn new() -> Site {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir(root.join("schemas")).unwrap();
        for entry in fs::read_dir(demo_dir().join("schemas")).unwrap() {
            let path = entry.unwrap().path();
            fs::copy(&path, root.join("schemas").join(path.file_name().unwrap())).unwrap();
        }
        fs::copy(demo_dir().join("networks.tsv"), root.join("networks.tsv")).unwrap();
        fs::create_dir(root.join("requests")).unwrap();
        fs::copy(
            demo_dir().join("requests/cover-charge.xml"),
            root.join("requests/cover-charge.xml"),
        )
        .unwrap();
        fs::write(root.join("stopwords.txt"), STOPWORDS).unwrap();
        fs::write(root.join("synonyms.txt"), SYNONYMS).unwrap();
        let mut config = ServiceConfig::new(root.join("data"), root.join("schemas"), root.join("networks.tsv"));
        config.synonym_table_path = Some(root.join("synonyms.txt"));
        config.stopwords_path = Some(root.join("stopwords.txt"));
        config.password_iterations = 1;
        config.fsync = false;
        config.flush_interval_ms = 50;
        config.port = free_port();
        config.base_url = format!("http://127.0.0.1:{}", config.port);
        let site = Site {
            config_path: root.join("classifieds.conf"),
            dir,
            config,
        };
        site.write_config();
        site
    }

    pub fn write_config(&self) {
        fs::write(&self.config_path, self.config.to_text()).unwrap();
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    /// Runs `classifieds admin --config <site> <args>` and returns stdout.
    pub fn admin(&self, args: &[&str]) -> String {
        let out = Command::new(BIN)
            .arg("admin")
            .arg("--config")
            .arg(&self.config_path)
            .args(args)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "admin {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    pub fn open_at(&self, now: DateTime<Utc>) -> Service {
        Service::open_with(
            self.config.clone(),
            OpenOptions {
                clock: Some(Arc::new(ManualClock::new(now))),
                rng_seed: Some(7),
            },
        )
        .unwrap()
    }

    /// Starts `classifieds serve` and waits until it answers.
    pub fn serve(&self) -> Server {
        let child = Command::new(BIN)
            .arg("serve")
            .arg("--config")
            .arg(&self.config_path)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let server = Server {
            child,
            base: format!("http://127.0.0.1:{}", self.config.port),
        };
        let client = server.client();
        let deadline = Instant::now() + Duration::from_secs(20);
        loop {
            if let Ok((200, _)) = client.try_get("/health") {
                return server;
            }
            assert!(Instant::now() < deadline, "service did not come up");
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}

pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn client(&self) -> Client {
        Client::new(&self.base)
    }

    /// SIGKILL, no chance to flush or clean up.
    pub fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[derive(Clone)]
pub struct Client {
    base: String,
    agent: ureq::Agent,
    pub token: Option<String>,
}

pub type Reply = Result<(u16, Value), ureq::Error>;

impl Client {
    pub fn new(base: &str) -> Client {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .max_idle_connections(0)
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into();
        Client {
            base: base.to_string(),
            agent,
            token: None,
        }
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
        let mut resp = resp?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string()?;
        let value = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap_or(Value::Null) };
        Ok((status, value))
    }

    fn auth(&self) -> Option<String> {
        self.token.as_ref().map(|t| format!("Bearer {t}"))
    }

    pub fn try_get(&self, path: &str) -> Reply {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        if let Some(a) = self.auth() {
            req = req.header("Authorization", a);
        }
        Self::finish(req.call())
    }

    pub fn get_query(&self, path: &str, query: &[(String, String)]) -> (u16, Value) {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        for (k, v) in query {
            req = req.query(k, v);
        }
        if let Some(a) = self.auth() {
            req = req.header("Authorization", a);
        }
        Self::finish(req.call()).unwrap()
    }

    pub fn try_send(&self, method: &str, path: &str, body: Value) -> Reply {
        let url = format!("{}{path}", self.base);
        let auth = self.auth();
        macro_rules! send {
            ($req:expr) => {{
                let mut req = $req;
                if let Some(a) = auth {
                    req = req.header("Authorization", a);
                }
                Self::finish(req.send_json(&body))
            }};
        }
        match method {
            "POST" => send!(self.agent.post(url)),
            "PATCH" => send!(self.agent.patch(url)),
            other => panic!("unsupported method {other}"),
        }
    }

    pub fn post(&self, path: &str, body: Value) -> (u16, Value) {
        self.try_send("POST", path, body).unwrap()
    }

    pub fn login(&self, username: &str, password: &str) -> Client {
        let (status, body) = self.post("/auth/login", serde_json::json!({"login": username, "password": password}));
        assert_eq!(status, 200, "login {username}: {body}");
        let mut c = self.clone();
        c.token = Some(body["session_token"].as_str().unwrap().to_string());
        c
    }
}

/// A verified account with no profile details.
pub fn member(service: &Service, username: &str, domain: &str) -> classifieds_core::UserId {
    let pending = service
        .register(classifieds_core::Registration {
            email: format!("{username}@{domain}"),
            username: username.into(),
            password: "correct horse".into(),
            full_name: None,
            home_location: None,
        })
        .unwrap();
    service.verify(&pending.token).unwrap();
    pending.user_id
}

pub fn forsale(title: &str, visibility: classifieds_core::marketplace::Visibility) -> classifieds_core::marketplace::ListingDraft {
    classifieds_core::marketplace::ListingDraft {
        category: "forsale".into(),
        subcategory: None,
        tags: Vec::new(),
        description: String::new(),
        values: [("Title".to_string(), title.to_string()), ("Price".to_string(), "25.00".to_string())]
            .into_iter()
            .collect(),
        visibility,
        location: None,
    }
}

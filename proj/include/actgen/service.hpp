#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "actgen/corpus.hpp"
#include "actgen/encoding.hpp"
#include "actgen/model.hpp"

namespace httplib {
class Server;
}

namespace actgen {

enum class Setup { Natural, Synthetic };

std::string_view setup_name(Setup s);
std::optional<Setup> parse_setup(std::string_view s);

/// Fixed at creation so a session replays identically.
struct SessionOptions {
  DecodingConfig decoding{1.0, 0, 0.9, 24, 7, 1};
  std::size_t k = 4;  // recurring context size
};

struct SeedTurn {
  Speaker speaker = Speaker::Therapist;
  std::string text;
  std::optional<DialogueAct> act;  // predicted by the RAC-Head when absent
};

struct AgentTurn {
  int turn_index = 0;
  Speaker speaker = Speaker::Therapist;
  std::string text;
  DialogueAct act = DialogueAct::ID;
};

nlohmann::ordered_json to_json(const AgentTurn& t);

/// Error with the HTTP status and machine-readable code it maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

/// Loaded policy shared read-only by every session.
struct ServiceModel {
  MultiHeadModel policy;
  TokenSpace space;
  std::string checkpoint;  // name reported by /health and matched against create requests
};

/// Sessions of the natural setup (human client, agent therapist) and the synthetic setup
/// (agent on both sides). Each session persists as <id>.session.json plus an append-only
/// <id>.jsonl transcript in corpus format when a store directory is given.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const ServiceModel> model, std::filesystem::path store_dir = {});

  const ServiceModel& model() const { return *model_; }

  std::string create(Setup setup, const std::vector<SeedTurn>& seed, const SessionOptions& options);
  /// Appends the client turn and the agent's reply; only one turn per session is in flight.
  AgentTurn post_utterance(const std::string& id, const std::string& client_text);
  /// Generates the next turn for whichever role is due.
  AgentTurn step(const std::string& id);
  Dialogue transcript(const std::string& id) const;
  Setup setup(const std::string& id) const;
  std::vector<std::string> session_ids() const;

 private:
  struct Session {
    std::string id;
    Setup setup = Setup::Natural;
    SessionOptions options;
    std::size_t seed_size = 0;
    Dialogue dialogue;
    std::mutex turn;  // held while a turn is being produced
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  Utterance agent_turn(Session& s, Speaker speaker);
  void append(Session& s, Utterance u);
  void persist_header(const Session& s) const;
  void restore();

  std::shared_ptr<const ServiceModel> model_;
  std::filesystem::path store_dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// Transcript as a single corpus-format dialogue record: {dialogue_id, turns: [...]}.
nlohmann::ordered_json transcript_json(const Dialogue& d);

/// Installs the HTTP routes:
///   POST /sessions, POST /sessions/{id}/utterance, POST /sessions/{id}/step,
///   GET /sessions/{id}/transcript, GET /health.
void register_routes(httplib::Server& server, SessionManager& sessions);

}  // namespace actgen

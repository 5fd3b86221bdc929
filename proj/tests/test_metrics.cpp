#include <catch_amalgamated.hpp>

#include <nomadsim/nomadsim.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace nomadsim;
using namespace nomadsim::literals;

namespace {

AmfState sample_state() {
    AmfState st;
    apply_op(st, [] {
        ControlOp op;
        op.id = {1, 1};
        op.lamport = 1;
        op.kind = OpKind::Register;
        op.subject = "ue1";
        return op;
    }());
    apply_op(st, [] {
        ControlOp op;
        op.id = {1, 2};
        op.lamport = 2;
        op.kind = OpKind::SessionCreate;
        op.subject = "s1";
        op.params = {{"ue", "ue1"}};
        return op;
    }());
    return st;
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

} // namespace

// ---- state digests -----------------------------------------------------------

TEST_CASE("equal control-plane states digest identically regardless of history order") {
    const AmfState a = sample_state();

    // Rebuild the same state applying the ops by hand in a different casting
    // order (maps normalize iteration, so the digest must agree).
    AmfState b;
    ControlOp reg;
    reg.id = {1, 1};
    reg.lamport = 1;
    reg.kind = OpKind::Register;
    reg.subject = "ue1";
    ControlOp sess;
    sess.id = {1, 2};
    sess.lamport = 2;
    sess.kind = OpKind::SessionCreate;
    sess.subject = "s1";
    sess.params = {{"ue", "ue1"}};
    apply_op(b, reg);
    apply_op(b, sess);

    REQUIRE(a == b);
    REQUIRE(digest_amf_state(a) == digest_amf_state(b));
}

TEST_CASE("every state field moves the digest") {
    const AmfState base = sample_state();
    const std::uint64_t d0 = digest_amf_state(base);

    AmfState m = base;
    m.registrations.at("ue1").version += 1;
    REQUIRE(digest_amf_state(m) != d0);

    m = base;
    m.registrations.at("ue1").serving = "elsewhere";
    REQUIRE(digest_amf_state(m) != d0);

    m = base;
    m.sessions.at("s1").state = "modified:x";
    REQUIRE(digest_amf_state(m) != d0);

    m = base;
    m.sessions.at("s1").policy_version = 9;
    REQUIRE(digest_amf_state(m) != d0);

    m = base;
    m.sessions.at("s1").anchor = proxy_anchor(4);
    REQUIRE(digest_amf_state(m) != d0);

    m = base;
    m.applied_ops.insert({2, 1});
    REQUIRE(digest_amf_state(m) != d0);

    REQUIRE(digest_amf_state(AmfState{}) != d0);
}

TEST_CASE("grant table digests cover every grant field and authority") {
    Grant g;
    g.id = 5;
    g.token = 2;
    g.holder = 1;
    g.band = 7;
    g.region = 0;
    g.window = {1_sec, 2_sec};
    g.power_cap_dbm = 20.0;

    std::map<AuthorityId, std::map<GrantId, Grant>> base{{"alpha", {{g.id, g}}},
                                                         {"beta", {}}};
    const std::uint64_t d0 = digest_grant_tables(base);
    REQUIRE(d0 != digest_grant_tables({}));

    auto flip = [&](auto mutate) {
        auto copy = base;
        mutate(copy);
        return digest_grant_tables(copy);
    };
    REQUIRE(flip([](auto& t) { t["alpha"].at(5).band = 8; }) != d0);
    REQUIRE(flip([](auto& t) { t["alpha"].at(5).window.end = 3_sec; }) != d0);
    REQUIRE(flip([](auto& t) { t["alpha"].at(5).power_cap_dbm = 21.0; }) != d0);
    REQUIRE(flip([](auto& t) { t["alpha"].at(5).holder = 2; }) != d0);
    REQUIRE(flip([](auto& t) { t.erase("beta"); }) != d0);

    // Moving the same grant to another authority changes identity.
    auto moved = base;
    moved["beta"][g.id] = g;
    moved["alpha"].clear();
    REQUIRE(digest_grant_tables(moved) != d0);
}

// ---- NDJSON emission ------------------------------------------------------------

TEST_CASE("an empty report emits exactly one header line") {
    MetricsReport r;
    r.scenario = "t";
    r.seed = 9;
    r.duration = 5_sec;
    r.finished_at = 5_sec;
    REQUIRE(r.empty());

    const std::string out = metrics_to_string(r);
    const auto lines = lines_of(out);
    REQUIRE(lines.size() == 1);

    const Json h = Json::parse(lines[0]);
    REQUIRE(h.at("type") == "header");
    REQUIRE(h.at("format") == "nomadsim.metrics.v1");
    REQUIRE(h.at("scenario") == "t");
    REQUIRE(h.at("seed") == 9);
    REQUIRE(h.at("duration_us") == 5'000'000);
    REQUIRE(h.at("finished_at_us") == 5'000'000);
    REQUIRE(h.at("records") == 0);
}

namespace {

MetricsReport sample_report() {
    MetricsReport r;
    r.scenario = "demo";
    r.seed = 42;
    r.duration = 10_sec;
    r.finished_at = 10_sec;

    TransmissionRecord tx;
    tx.at = 1_sec;
    tx.sender = 1;
    tx.link = LinkUid::bearer(10);
    tx.role = BearerRole::Backhaul;
    tx.category = MsgCategory::ControlN2;
    tx.size_bytes = 256;
    tx.dropped = false;
    tx.delivered_at = SimTime::from_us(1'020'000);
    r.records.emplace_back(tx);

    TransmissionRecord lost = tx;
    lost.at = 2_sec;
    lost.dropped = true;
    lost.drop_reason = DropReason::Loss;
    r.records.emplace_back(lost);

    RadioTxRecord radio;
    radio.at = 3_sec;
    radio.node = 1;
    radio.band = 5;
    radio.region = 0;
    radio.power_dbm = 20.0;
    radio.grant = 7;
    radio.category = MsgCategory::UserData;
    r.records.emplace_back(radio);

    r.counters.events_processed = 12;
    r.counters.tx_attempts = 3;
    r.counters.tx_delivered = 2;
    r.counters.tx_dropped["loss"] = 1;
    r.amf_state_digest = digest_amf_state(sample_state());
    r.grant_table_digest = digest_grant_tables({});
    r.nodes.push_back({1, "connected", 4, 0, 0, 0, 0, "granted"});
    return r;
}

} // namespace

TEST_CASE("a full report emits header, records, counters, digest in order") {
    const MetricsReport r = sample_report();
    const auto lines = lines_of(metrics_to_string(r));
    REQUIRE(lines.size() == 1 + r.records.size() + 1 + 1);

    REQUIRE(Json::parse(lines[0]).at("type") == "header");
    REQUIRE(Json::parse(lines[0]).at("records") == 3);

    const Json rec1 = Json::parse(lines[1]);
    REQUIRE(rec1.at("type") == "record");
    REQUIRE(rec1.at("kind") == "transmission");
    REQUIRE(rec1.at("dropped") == false);
    REQUIRE(rec1.at("drop_reason") == "");
    REQUIRE(rec1.at("delivered_at_us") == 1'020'000);

    const Json rec2 = Json::parse(lines[2]);
    REQUIRE(rec2.at("drop_reason") == "loss");
    REQUIRE(rec2.at("delivered_at_us") == -1); // never delivered

    const Json rec3 = Json::parse(lines[3]);
    REQUIRE(rec3.at("kind") == "radio_tx");
    REQUIRE(rec3.at("grant") == 7);

    const Json counters = Json::parse(lines[4]);
    REQUIRE(counters.at("type") == "counters");
    REQUIRE(counters.at("events_processed") == 12);
    REQUIRE(counters.at("tx_dropped") == Json{{"loss", 1}});
    // Zero-valued counters still appear: the line shape never varies.
    REQUIRE(counters.contains("licensing_violations"));
    REQUIRE(counters.at("licensing_violations") == 0);

    const Json digest = Json::parse(lines[5]);
    REQUIRE(digest.at("type") == "digest");
    REQUIRE(digest.at("amf_state") == to_hex(r.amf_state_digest));
    REQUIRE(digest.at("grant_table") == to_hex(r.grant_table_digest));
    REQUIRE(digest.at("nodes").size() == 1);
    REQUIRE(digest.at("nodes")[0].at("mode") == "connected");
    REQUIRE(digest.at("nodes")[0].at("radio") == "granted");
}

TEST_CASE("counters serialize every field in a fixed order") {
    const Json j = metrics_detail::counters_to_json(Counters{});
    REQUIRE(j.size() == 37);
    // Key order is part of the byte-stable output contract.
    std::vector<std::string> keys;
    for (const auto& [k, _] : j.items()) keys.push_back(k);
    REQUIRE(keys.front() == "events_processed");
    REQUIRE(keys[1] == "tx_attempts");
    REQUIRE(keys.back() == "warning_linkdown_noop");

    // Map-valued counters serialize as objects.
    Counters c;
    c.denials["Conflict"] = 2;
    c.control_served["isolated"] = 4;
    const Json j2 = metrics_detail::counters_to_json(c);
    REQUIRE(j2.at("denials") == Json{{"Conflict", 2}});
    REQUIRE(j2.at("control_served") == Json{{"isolated", 4}});
}

TEST_CASE("emission is byte-deterministic") {
    const MetricsReport r = sample_report();
    REQUIRE(metrics_to_string(r) == metrics_to_string(r));

    // Any change to the report changes the bytes.
    MetricsReport r2 = sample_report();
    r2.counters.events_processed += 1;
    REQUIRE(metrics_to_string(r2) != metrics_to_string(r));
}

TEST_CASE("file emission matches in-memory emission") {
    const MetricsReport r = sample_report();
    const std::string path = "/tmp/nomadsim_metrics_test.ndjson";
    emit_metrics_file(r, path);
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    REQUIRE(buf.str() == metrics_to_string(r));

    REQUIRE_THROWS_AS(emit_metrics_file(r, "/nonexistent_dir/x.ndjson"), SimError);
}

#include <doctest.h>

#include <algorithm>

#include "common/error.hpp"
#include "sm/manager.hpp"

using namespace nds;
using namespace nds::sm;

namespace {

json demand(const std::string &sn, int prio, int min, int pref) {
    return {{"sn_id", sn}, {"priority", prio}, {"min_bw_mhz", min}, {"pref_bw_mhz", pref}};
}

int count(const Effects &fx, const std::string &kind) {
    return static_cast<int>(std::count_if(fx.messages.begin(), fx.messages.end(),
                                          [&](const Outbound &o) { return o.message.kind == kind; }));
}

const Outbound *find_msg(const Effects &fx, const std::string &sn, const std::string &kind) {
    for (const auto &o : fx.messages)
        if (o.sn_id == sn && o.message.kind == kind)
            return &o;
    return nullptr;
}

/// Drives the SM directly, firing its timers by hand.
struct Harness {
    SpectrumManager sm;
    std::vector<TimerRequest> timers;
    std::vector<std::pair<std::size_t, json>> checkpoints; // ledger size -> snapshot

    explicit Harness(std::map<std::string, spectrum::DemandProfile> provisioned = {})
        : sm{SmConfig{}, std::move(provisioned)} {}

    Effects take(Effects fx) {
        for (const auto &t : fx.timers)
            timers.push_back(t);
        checkpoints.emplace_back(sm.ledger().size(), sm.snapshot());
        return fx;
    }

    /// Fires every pending timer due at or before `now`, in time order.
    void advance(SimTime now) {
        std::stable_sort(timers.begin(), timers.end(), [](auto &a, auto &b) { return a.at < b.at; });
        while (!timers.empty() && timers.front().at <= now) {
            const auto t = timers.front();
            timers.erase(timers.begin());
            take(sm.on_timer(t.at, t));
            std::stable_sort(timers.begin(), timers.end(), [](auto &a, auto &b) { return a.at < b.at; });
        }
    }

    Effects reg(SimTime now, const std::string &sn, int prio, int min, int pref) {
        return take(sm.handle_register(now, demand(sn, prio, min, pref)));
    }

    Effects accept(SimTime now, const std::string &sn) {
        return take(sm.handle_accept(now, sn, sm.state().offers.at(sn).epoch));
    }

    /// Register, accept, and ack every notice; then activate.
    void join(SimTime now, const std::string &sn, int prio, int min, int pref) {
        reg(now, sn, prio, min, pref);
        ack_all(now, accept(now, sn));
        advance(now + sm.config().t_apply_ms);
    }

    void ack_all(SimTime now, const Effects &fx) {
        for (const auto &o : fx.messages)
            if (o.message.kind == "REALLOC_NOTICE")
                take(sm.handle_ack(now, o.sn_id, o.message.payload.at("epoch")));
    }

    const SpectrumAllocation *active(const std::string &sn) const { return sm.state().active.find(sn); }
    SessionState state_of(const std::string &sn) const { return sm.state().sessions.at(sn).state; }
};

void check_block(const SpectrumAllocation *a, int start, int width) {
    REQUIRE(a);
    CHECK(a->start_mhz() == start);
    CHECK(a->width_mhz() == width);
}

/// SN-1 and SN-2 committed: [3700,3710) and [3711,3771).
Harness walkthrough_steady() {
    Harness h{{{"SN-3", spectrum::DemandProfile{"SN-3", spectrum::QosPriority{1}, 15, 30}}}};
    h.join(0, "SN-1", 0, 10, 10);
    h.join(10, "SN-2", 2, 20, 60);
    return h;
}

} // namespace

TEST_CASE("register into an empty band") {
    Harness h;
    const auto fx = h.reg(0, "SN-1", 0, 10, 10);
    const auto *offer = find_msg(fx, "SN-1", "OFFER");
    REQUIRE(offer);
    CHECK(offer->message.payload["epoch"] == 1);
    CHECK(offer->message.payload["allocation"]["start_mhz"] == 3700);
    CHECK(offer->message.payload["allocation"]["width_mhz"] == 10);
    CHECK(h.state_of("SN-1") == SessionState::PendingOffer);
    REQUIRE(fx.timers.size() == 1);
    CHECK(fx.timers[0].kind == TimerKind::OfferDeadline);
    CHECK(fx.timers[0].at == 5000);
}

TEST_CASE("accept") {
    SUBCASE("matching epoch commits") {
        Harness h;
        h.reg(0, "SN-1", 0, 10, 10);
        const auto fx = h.accept(100, "SN-1");
        CHECK(h.state_of("SN-1") == SessionState::Committed);
        const auto *commit = find_msg(fx, "SN-1", "COMMIT");
        REQUIRE(commit);
        CHECK(commit->message.payload["activate_at"] == 200);
        h.advance(200);
        check_block(h.active("SN-1"), 3700, 10);
        CHECK(h.sm.state().sessions.at("SN-1").current_alloc->same_block(*h.active("SN-1")));
    }
    SUBCASE("after the deadline") {
        Harness h;
        h.reg(0, "SN-1", 0, 10, 10);
        const auto fx = h.accept(5001, "SN-1");
        const auto *rej = find_msg(fx, "SN-1", "REJECT");
        REQUIRE(rej);
        CHECK(rej->message.payload["reason"] == "offer_expired");
    }
    SUBCASE("deadline timer expires the offer") {
        Harness h;
        h.reg(0, "SN-1", 0, 10, 10);
        h.advance(5000);
        CHECK(h.state_of("SN-1") == SessionState::Unregistered);
        const auto fx = h.take(h.sm.handle_accept(5001, "SN-1", 1));
        CHECK(find_msg(fx, "SN-1", "REJECT")->message.payload["reason"] == "offer_expired");
    }
    SUBCASE("stale epoch") {
        Harness h;
        h.reg(0, "SN-1", 0, 10, 10);
        const auto fx = h.take(h.sm.handle_accept(10, "SN-1", 0));
        CHECK(find_msg(fx, "SN-1", "REJECT")->message.payload["reason"] == "stale_epoch");
        CHECK(h.state_of("SN-1") == SessionState::Unregistered);
    }
}

TEST_CASE("register rejections") {
    SUBCASE("min exceeds free spectrum") {
        Harness h;
        h.join(0, "BIG", 0, 49, 49); // 50 MHz left after the guard
        const auto fx = h.reg(1000, "S", 2, 60, 60);
        CHECK(find_msg(fx, "S", "REJECT")->message.payload["reason"] == "insufficient_spectrum");
    }
    SUBCASE("invalid demand") {
        Harness h;
        auto fx = h.take(h.sm.handle_register(0, demand("X", 0, 10, 200)));
        CHECK(find_msg(fx, "X", "REJECT")->message.payload["reason"] == "invalid_demand");
        fx = h.take(h.sm.handle_register(0, json{{"sn_id", "Y"}}));
        CHECK(find_msg(fx, "Y", "REJECT")->message.payload["reason"] == "invalid_demand");
    }
    SUBCASE("already registered") {
        Harness h;
        h.join(0, "A", 0, 10, 10);
        const auto fx = h.reg(1000, "A", 0, 10, 10);
        CHECK(find_msg(fx, "A", "REJECT")->message.payload["reason"] == "already_registered");
    }
}

TEST_CASE("every issued plan takes the next epoch") {
    auto h = walkthrough_steady();
    const auto issued = h.sm.state().issued_epoch;
    const auto fx = h.reg(20000, "SN-3", 1, 15, 30);
    CHECK(find_msg(fx, "SN-3", "OFFER")->message.payload["epoch"] == issued + 1);
}

TEST_CASE("AGV joining the walkthrough state") {
    auto h = walkthrough_steady();
    check_block(h.active("SN-1"), 3700, 10);
    check_block(h.active("SN-2"), 3711, 60);

    const auto offer_fx = h.reg(20000, "SN-3", 1, 15, 30);
    const auto &alloc = find_msg(offer_fx, "SN-3", "OFFER")->message.payload["allocation"];
    CHECK(alloc["start_mhz"] == 3711);
    CHECK(alloc["width_mhz"] == 30);

    const auto fx = h.accept(20010, "SN-3");
    CHECK(count(fx, "REALLOC_NOTICE") == 1);
    CHECK(find_msg(fx, "SN-2", "REALLOC_NOTICE"));
    CHECK(find_msg(fx, "SN-3", "COMMIT"));
    CHECK_FALSE(find_msg(fx, "SN-1", "REALLOC_NOTICE"));
    h.ack_all(20010, fx);
    h.advance(20110);
    check_block(h.active("SN-1"), 3700, 10);
    check_block(h.active("SN-3"), 3711, 30);
    check_block(h.active("SN-2"), 3742, 58);

    SUBCASE("release re-expands SN-2") {
        const auto rel = h.take(h.sm.handle_release(30000, "SN-3"));
        CHECK(h.state_of("SN-3") == SessionState::Released);
        h.ack_all(30000, rel);
        h.advance(30100);
        check_block(h.active("SN-2"), 3711, 60);
        check_block(h.active("SN-1"), 3700, 10);
        CHECK(h.sm.state().sessions.at("SN-2").current_alloc->width_mhz() == 60);
    }
}

TEST_CASE("intent reservation") {
    SUBCASE("registration within the hold gets the reserved block") {
        auto h = walkthrough_steady();
        const auto before = h.sm.ledger().size();
        const auto fx = h.take(h.sm.handle_intent(1000, "SN-3", 5000));
        CHECK(h.sm.ledger()[before].kind == EventKind::Intent);
        CHECK(h.sm.ledger()[before].payload["status"] == "reserved");
        CHECK(find_msg(fx, "SN-2", "REALLOC_NOTICE"));
        h.ack_all(1000, fx);
        h.advance(1100);
        check_block(h.active("SN-2"), 3742, 58);
        check_block(h.active("SN-3"), 3711, 30); // held on air for the arrival

        const auto reg = h.reg(4000, "SN-3", 1, 15, 30);
        const auto &a = find_msg(reg, "SN-3", "OFFER")->message.payload["allocation"];
        CHECK(a["start_mhz"] == 3711);
        CHECK(a["width_mhz"] == 30);
        const auto acc = h.accept(4010, "SN-3");
        CHECK(count(acc, "REALLOC_NOTICE") == 0);
        h.advance(20000);
        CHECK(h.state_of("SN-3") == SessionState::Committed);
        CHECK(h.sm.state().reservations.empty());
        check_block(h.active("SN-2"), 3742, 58);
    }
    SUBCASE("an unused hold expires and SN-2 grows back") {
        auto h = walkthrough_steady();
        h.ack_all(1000, h.take(h.sm.handle_intent(1000, "SN-3", 5000)));
        h.advance(1100);
        check_block(h.active("SN-2"), 3742, 58);
        h.timers.erase(std::remove_if(h.timers.begin(), h.timers.end(),
                                      [](auto &t) { return t.kind != TimerKind::HoldExpiry; }),
                       h.timers.end());
        REQUIRE(h.timers.size() == 1);
        CHECK(h.timers[0].at == 15000);
        h.advance(15000);
        CHECK(h.sm.state().reservations.empty());
        h.advance(15100);
        check_block(h.active("SN-2"), 3711, 60);
        CHECK_FALSE(h.active("SN-3"));
    }
    SUBCASE("unknown SN changes nothing") {
        auto h = walkthrough_steady();
        const auto plan = h.sm.state().latest;
        const auto fx = h.take(h.sm.handle_intent(1000, "ghost", 5000));
        CHECK(fx.messages.empty());
        CHECK(h.sm.state().latest == plan);
        CHECK(h.sm.ledger().back().payload["status"] == "unknown_sn");
    }
}

TEST_CASE("unacknowledged notice degrades the session") {
    auto h = walkthrough_steady();
    h.reg(20000, "SN-3", 1, 15, 30);
    const auto fx = h.accept(20010, "SN-3"); // SN-2 never acks
    REQUIRE(find_msg(fx, "SN-2", "REALLOC_NOTICE"));
    h.advance(20110);
    CHECK(h.state_of("SN-2") == SessionState::Degraded);

    // The next plan re-notifies the degraded SN.
    const auto rel = h.take(h.sm.handle_release(22000, "SN-1"));
    const auto *notice = find_msg(rel, "SN-2", "REALLOC_NOTICE");
    REQUIRE(notice);
    h.ack_all(22000, rel);
    CHECK(h.state_of("SN-2") == SessionState::Committed);
}

TEST_CASE("release") {
    SUBCASE("releasing the pinned SN frees its block") {
        auto h = walkthrough_steady();
        const auto epoch = h.sm.state().latest.epoch;
        h.ack_all(30000, h.take(h.sm.handle_release(30000, "SN-1")));
        h.advance(30100);
        CHECK_FALSE(h.active("SN-1"));
        CHECK(h.sm.state().latest.epoch == epoch + 1);
        check_block(h.active("SN-2"), 3700, 60);
    }
    SUBCASE("double release is ignored") {
        auto h = walkthrough_steady();
        h.take(h.sm.handle_release(30000, "SN-2"));
        const auto size = h.sm.ledger().size();
        const auto fx = h.take(h.sm.handle_release(30001, "SN-2"));
        CHECK(fx.messages.empty());
        CHECK(h.sm.ledger().size() == size);
    }
    SUBCASE("plan unchanged means no notices") {
        auto h = walkthrough_steady();
        h.reg(20000, "X", 2, 100, 100); // cannot fit
        CHECK(h.sm.ledger().back().kind == EventKind::Reject);
        const auto size = h.sm.ledger().size();
        const auto fx = h.take(h.sm.handle_release(20001, "X"));
        CHECK(fx.messages.empty());
        CHECK(h.sm.ledger().size() == size);
    }
}

TEST_CASE("higher priority newcomer preempts") {
    Harness h;
    h.join(0, "S", 2, 60, 60);
    const auto fx = h.reg(1000, "C", 0, 60, 60);
    REQUIRE(find_msg(fx, "C", "OFFER"));
    const auto acc = h.accept(1010, "C");
    const auto *notice = find_msg(acc, "S", "REALLOC_NOTICE");
    REQUIRE(notice);
    CHECK(notice->message.payload["allocation"].is_null());
    h.ack_all(1010, acc);
    h.advance(1110);
    CHECK(h.state_of("S") == SessionState::Unregistered);
    CHECK(h.sm.ledger().back().kind == EventKind::Commit);
}

TEST_CASE("replay") {
    SUBCASE("empty ledger") {
        const auto st = replay({});
        CHECK(st == SmState{});
        CHECK(st.issued_epoch == 0);
        CHECK(to_json(st)["sessions"].empty());
    }
    SUBCASE("full and truncated ledgers reproduce the live state") {
        auto h = walkthrough_steady();
        h.ack_all(1000, h.take(h.sm.handle_intent(1000, "SN-3", 5000)));
        h.advance(1100);
        h.reg(4000, "SN-3", 1, 15, 30);
        h.accept(4010, "SN-3");
        h.advance(4110);
        h.ack_all(9000, h.take(h.sm.handle_release(9000, "SN-3")));
        h.advance(30000);

        const auto &ledger = h.sm.ledger();
        CHECK(to_json(replay(ledger)) == h.sm.snapshot());
        CHECK(replay(ledger) == h.sm.state());
        for (const auto &[k, snap] : h.checkpoints)
            CHECK(to_json(replay(std::span{ledger.data(), k})) == snap);

        // through the text encoding as well
        std::string text;
        for (const auto &e : ledger)
            text += encode_ledger_line(e) + "\n";
        CHECK(to_json(replay(decode_ledger(text))) == h.sm.snapshot());
    }
    SUBCASE("corrupt ledgers") {
        auto h = walkthrough_steady();
        auto ledger = h.sm.ledger();
        auto gap = ledger;
        gap.erase(gap.begin() + 1);
        CHECK_THROWS_AS(replay(gap), CorruptLedger);
        auto back = ledger;
        back[2].time = -1;
        CHECK_THROWS_AS(replay(back), CorruptLedger);
        auto bad = ledger;
        bad[1].payload = json{{"nothing", 1}};
        CHECK_THROWS_AS(replay(bad), CorruptLedger);
        CHECK_THROWS_AS(decode_ledger("{not json\n"), CorruptLedger);
        CHECK_THROWS_AS(decode_ledger("{\"v\":1,\"kind\":\"NOPE\",\"seq\":1,\"time\":0,\"payload\":{}}\n"),
                        CorruptLedger);
        CHECK(decode_ledger("\n\n").empty());
    }
}

TEST_CASE("wire messages") {
    const Message m{"OFFER", 7, 1234, {{"sn_id", "SN-1"}, {"epoch", 2}}};
    const auto line = encode(m);
    CHECK(line.back() == '\n');
    CHECK(decode(line) == m);
    CHECK_THROWS_AS(decode("garbage"), ValidationError);
    CHECK_THROWS_AS(decode(R"({"v":9,"kind":"OFFER","seq":1,"time":0,"payload":{}})"), ValidationError);
    CHECK_THROWS_AS(decode(R"({"v":1,"seq":1,"time":0,"payload":{}})"), ValidationError);
}

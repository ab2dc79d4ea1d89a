#include "ltearp/sim.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace ltearp {

namespace {

#define SIM_CHECK(cond, msg)                                                   \
    do {                                                                       \
        if (!(cond)) throw std::logic_error(std::string("sim invariant: ") + msg); \
    } while (0)

constexpr int kUnbounded = std::numeric_limits<int>::max();

int ceil_div(int bytes, int per_unit) { return (bytes + per_unit - 1) / per_unit; }

template <typename T>
class Slab {
public:
    std::uint32_t acquire(T value) {
        if (!free_.empty()) {
            const auto id = free_.back();
            free_.pop_back();
            items_[id] = std::move(value);
            return id;
        }
        items_.push_back(std::move(value));
        return static_cast<std::uint32_t>(items_.size() - 1);
    }
    void release(std::uint32_t id) { free_.push_back(id); }
    T& operator[](std::uint32_t id) { return items_[id]; }

private:
    std::vector<T> items_;
    std::vector<std::uint32_t> free_;
};

enum class ReqKind : std::uint8_t { RarGrant, RarData, Msg3, Msg4Grant, Msg4Data, StepGrant, StepData };

struct Request {
    Channel channel = Channel::Pdcch;
    ReqKind kind = ReqKind::RarGrant;
    bool pending = true;  // not yet fully served nor expired
    int units_left = 0;
    std::int64_t deadline = 0;  // service allowed while now < deadline
    std::uint32_t owner = 0;    // batch, group or transaction depending on kind
    std::uint32_t attempt = 0;
};

enum class EvKind : std::uint8_t { Enqueue, Expire, Fail, StartStep };

struct Event {
    EvKind kind;
    std::uint32_t target;
    std::uint32_t attempt;
};

struct Txn {
    std::uint64_t id = 0;
    std::int64_t arrival = 0;
    TxnState state = TxnState::AwaitingRao;
    int msg1_count = 0;
    std::int64_t msg1_time = 0;
    std::int64_t backoff_until = 0;
    int preamble = -1;
    std::uint32_t attempt = 0;
    int step = 0;           // next post-access message; == plan size means data
    int rbs_remaining = 0;  // data RBs still to deliver
    int hop_units = 0;      // shared-channel units of the message being granted
    bool hop_uplink = false;
};

// One RAO's detected preambles, answered by a single RAR.
struct RarBatch {
    std::int64_t msg1_time = 0;
    std::vector<std::uint32_t> groups;
};

// Transactions that picked the same preamble in one RAO.
struct PreambleGroup {
    std::int64_t msg1_time = 0;
    std::vector<std::uint32_t> members;
};

struct Message {
    bool uplink;
    int units;
};

class Simulator {
public:
    Simulator(const ScenarioSpec& spec, std::uint64_t seed, std::int64_t duration, std::int64_t warmup,
              std::ostream* trace)
        : spec_(spec), cell_(spec.cell), cat_(spec.catalog), rng_(seed), duration_(duration), warmup_(warmup),
          trace_(trace), arrivals_(spec.traffic.lambda_i), backoff_(0, spec.cell.w_c - 1),
          preamble_(0, spec.cell.d - 1) {
        result_.rng_seed = seed;
        result_.duration_subframes = duration;
        result_.warmup_subframes = warmup;
        result_.msg1_histogram.assign(static_cast<std::size_t>(cell_.m) + 2, 0);

        const int max_proc = std::max({1, cell_.proc_enb, cell_.proc_ue});
        const int horizon = std::max({cell_.t_rar, cell_.t_crt, cell_.t_other}) + 2 * max_proc + 2;
        calendar_.resize(std::bit_ceil(static_cast<unsigned>(horizon)));

        if (cat_.mode == SignalingMode::Full) {
            plan_ = {{true, ceil_div(cat_.b_comp, cat_.b_rb)},
                     {false, ceil_div(cat_.b_s_cmd, cat_.b_rb)},
                     {true, ceil_div(cat_.b_s_comp, cat_.b_rb)},
                     {false, ceil_div(cat_.b_r_dl, cat_.b_rb)},
                     {true, ceil_div(cat_.b_r_ul, cat_.b_rb)}};
        }
        data_rbs_ = ceil_div(spec.traffic.b_data, cat_.b_rb);
        prach_on_ = spec.limit_mask.has(Channel::Prach);
        preamble_slot_.assign(static_cast<std::size_t>(cell_.d), -1);
        for (auto c : {Channel::Pdcch, Channel::Pdsch, Channel::Pusch})
            result_.channels[idx(c)].bounded = spec.limit_mask.has(c);
        result_.channels[idx(Channel::Prach)].bounded = prach_on_;
    }

    SimResult run() {
        std::array<double, 4> capacity_sum{};
        for (now_ = 0; now_ < duration_; ++now_) {
            in_window_ = now_ >= warmup_;
            arrive();
            process_events();
            if (now_ % cell_.delta_rao == 0) random_access_opportunity();
            for (auto c : {Channel::Pdcch, Channel::Pdsch, Channel::Pusch}) {
                const int cap = capacity(c);
                if (in_window_ && cap != kUnbounded) capacity_sum[idx(c)] += cap;
                serve(c, cap);
            }
        }
        for (auto c : {Channel::Pdcch, Channel::Pdsch, Channel::Pusch}) {
            auto& ch = result_.channels[idx(c)];
            ch.mean_utilization = capacity_sum[idx(c)] > 0 ? ch.served_units / capacity_sum[idx(c)] : 0.0;
        }
        finalize();
        return result_;
    }

private:
    static std::size_t idx(Channel c) { return static_cast<std::size_t>(c); }

    int capacity(Channel c) const {
        if (!spec_.limit_mask.has(c)) return kUnbounded;
        switch (c) {
            case Channel::Pdcch: return pdcch_capacity(cell_);
            case Channel::Pdsch: return cell_.n_dlrb;
            case Channel::Pusch: return now_ % cell_.delta_rao == 0 ? std::max(0, cell_.n_ulrb - 6) : cell_.n_ulrb;
            case Channel::Prach: break;
        }
        return kUnbounded;
    }

    void log(const char* event, std::uint32_t txn) {
        if (trace_) *trace_ << now_ << ' ' << event << ' ' << txns_[txn].id << '\n';
    }

    void schedule(std::int64_t when, Event ev) {
        SIM_CHECK(when >= now_ && when - now_ < static_cast<std::int64_t>(calendar_.size()), "event outside calendar horizon");
        calendar_[static_cast<std::size_t>(when) & (calendar_.size() - 1)].push_back(ev);
    }

    // Requests created outside the event phase become ready next subframe at the earliest.
    std::int64_t later(int delay) const { return now_ + std::max(1, delay); }

    std::uint32_t make_request(Channel c, ReqKind kind, int units, std::int64_t deadline, std::uint32_t owner,
                               std::uint32_t attempt, std::int64_t ready) {
        const auto id = requests_.acquire(Request{c, kind, true, units, deadline, owner, attempt});
        schedule(deadline, {EvKind::Expire, id, 0});
        if (ready <= now_)
            queues_[idx(c)].push_back(id);
        else
            schedule(ready, {EvKind::Enqueue, id, 0});
        return id;
    }

    void arrive() {
        const int n = arrivals_(rng_);
        for (int i = 0; i < n; ++i) {
            Txn t;
            t.id = next_id_++;
            t.arrival = now_;
            t.backoff_until = now_;
            t.attempt = ++attempt_counter_;
            const auto slot = txns_.acquire(t);
            ++result_.created;
            awaiting_.push_back(slot);
            log("arrival", slot);
        }
    }

    void process_events() {
        auto& bucket = calendar_[static_cast<std::size_t>(now_) & (calendar_.size() - 1)];
        for (std::size_t i = 0; i < bucket.size(); ++i) {
            const Event ev = bucket[i];
            switch (ev.kind) {
                case EvKind::Enqueue: {
                    auto& r = requests_[ev.target];
                    if (r.pending && now_ < r.deadline) queues_[idx(r.channel)].push_back(ev.target);
                    break;
                }
                case EvKind::Expire: expire(ev.target); break;
                case EvKind::Fail:
                    if (txns_[ev.target].attempt == ev.attempt) fail(ev.target);
                    break;
                case EvKind::StartStep:
                    if (txns_[ev.target].attempt == ev.attempt) start_step(ev.target);
                    break;
            }
        }
        bucket.clear();
    }

    void random_access_opportunity() {
        std::vector<std::uint32_t> contenders;
        std::size_t keep = 0;
        for (auto slot : awaiting_) {
            if (txns_[slot].backoff_until <= now_)
                contenders.push_back(slot);
            else
                awaiting_[keep++] = slot;
        }
        awaiting_.resize(keep);
        if (contenders.empty()) return;

        std::vector<std::uint32_t> groups;
        std::vector<std::uint32_t> group_of;
        for (auto slot : contenders) {
            auto& t = txns_[slot];
            ++t.msg1_count;
            t.attempt = ++attempt_counter_;
            SIM_CHECK(t.msg1_count <= cell_.m + 1, "MSG1 count exceeds m+1");
            t.msg1_time = now_;
            t.state = TxnState::AwaitingRar;
            log("msg1", slot);
            if (!prach_on_) {
                t.preamble = static_cast<int>(groups.size());
                groups.push_back(groups_.acquire(PreambleGroup{now_, {slot}}));
                continue;
            }
            t.preamble = preamble_(rng_);
            int& g = preamble_slot_[static_cast<std::size_t>(t.preamble)];
            if (g < 0) {
                g = static_cast<int>(groups.size());
                groups.push_back(groups_.acquire(PreambleGroup{now_, {}}));
            }
            groups_[groups[static_cast<std::size_t>(g)]].members.push_back(slot);
        }
        if (prach_on_)
            for (auto slot : contenders) preamble_slot_[static_cast<std::size_t>(txns_[slot].preamble)] = -1;

        if (in_window_) {
            result_.preamble_transmissions += static_cast<std::int64_t>(contenders.size());
            for (auto g : groups) {
                const auto size = groups_[g].members.size();
                if (size > 1) result_.collided_transmissions += static_cast<std::int64_t>(size);
            }
            result_.channels[idx(Channel::Prach)].served_units += static_cast<std::int64_t>(contenders.size());
        }

        const auto batch = batches_.acquire(RarBatch{now_, std::move(groups)});
        make_request(Channel::Pdcch, ReqKind::RarGrant, 1, now_ + cell_.t_rar, batch, 0, later(cell_.proc_enb));
    }

    void serve(Channel c, int cap) {
        auto& queue = queues_[idx(c)];
        int used = 0;
        completed_.clear();
        while (!queue.empty() && used < cap) {
            const auto id = queue.front();
            auto& r = requests_[id];
            if (!r.pending) {
                queue.pop_front();
                continue;
            }
            SIM_CHECK(now_ < r.deadline, "request served after its deadline");
            const int take = std::min(cap - used, r.units_left);
            r.units_left -= take;
            used += take;
            if (r.units_left == 0) {
                r.pending = false;
                queue.pop_front();
                completed_.push_back(id);
            }
        }
        SIM_CHECK(used <= cap, "served units exceed channel capacity");
        if (in_window_) result_.channels[idx(c)].served_units += used;
        // continuations may enqueue on later channels in this same subframe
        std::vector<std::uint32_t> done;
        done.swap(completed_);
        for (auto id : done) on_served(id);
        completed_.swap(done);
    }

    void on_served(std::uint32_t id) {
        const Request r = requests_[id];
        switch (r.kind) {
            case ReqKind::RarGrant: {
                const auto& batch = batches_[r.owner];
                int activated = static_cast<int>(batch.groups.size());
                make_request(Channel::Pdsch, ReqKind::RarData, ceil_div(activated * cat_.b_rar, cat_.b_rb),
                             r.deadline, r.owner, 0, now_);
                break;
            }
            case ReqKind::RarData: {
                auto& batch = batches_[r.owner];
                for (auto g : batch.groups) {
                    for (auto slot : groups_[g].members) {
                        txns_[slot].state = TxnState::AwaitingMsg3Tx;
                        log("rar", slot);
                    }
                    make_request(Channel::Pusch, ReqKind::Msg3, ceil_div(cat_.b_req, cat_.b_rb),
                                 batch.msg1_time + cell_.t_crt, g, 0, later(cell_.proc_ue));
                }
                batch.groups.clear();
                batches_.release(r.owner);
                break;
            }
            case ReqKind::Msg3: {
                auto& group = groups_[r.owner];
                if (group.members.size() > 1) {
                    for (auto slot : group.members) {
                        log("collision", slot);
                        schedule(group.msg1_time + cell_.t_crt, {EvKind::Fail, slot, txns_[slot].attempt});
                    }
                } else {
                    const auto slot = group.members.front();
                    auto& t = txns_[slot];
                    t.state = TxnState::AwaitingMsg4;
                    log("msg3", slot);
                    make_request(Channel::Pdcch, ReqKind::Msg4Grant, 1, group.msg1_time + cell_.t_crt, slot, t.attempt,
                                 later(cell_.proc_enb));
                }
                group.members.clear();
                groups_.release(r.owner);
                break;
            }
            case ReqKind::Msg4Grant:
                if (txns_[r.owner].attempt == r.attempt)
                    make_request(Channel::Pdsch, ReqKind::Msg4Data, ceil_div(cat_.b_conn, cat_.b_rb), r.deadline, r.owner,
                                 r.attempt, now_);
                break;
            case ReqKind::Msg4Data: {
                auto& t = txns_[r.owner];
                if (t.attempt != r.attempt) break;
                log("msg4", r.owner);
                t.step = 0;
                t.rbs_remaining = data_rbs_;
                schedule(later(cell_.proc_ue), {EvKind::StartStep, r.owner, t.attempt});
                break;
            }
            case ReqKind::StepGrant: {
                const auto& t = txns_[r.owner];
                if (t.attempt != r.attempt) break;
                if (t.hop_uplink)
                    make_request(Channel::Pusch, ReqKind::StepData, t.hop_units, r.deadline, r.owner, r.attempt,
                                 later(cell_.proc_ue));
                else
                    make_request(Channel::Pdsch, ReqKind::StepData, t.hop_units, r.deadline, r.owner, r.attempt, now_);
                break;
            }
            case ReqKind::StepData: {
                auto& t = txns_[r.owner];
                if (t.attempt != r.attempt) break;
                if (t.step < static_cast<int>(plan_.size())) {
                    log("signaling", r.owner);
                    const bool was_uplink = plan_[static_cast<std::size_t>(t.step)].uplink;
                    ++t.step;
                    schedule(later(was_uplink ? cell_.proc_enb : cell_.proc_ue), {EvKind::StartStep, r.owner, t.attempt});
                } else {
                    t.rbs_remaining -= r.channel == Channel::Pusch ? t.hop_units : 0;
                    if (t.rbs_remaining <= 0) {
                        log("done", r.owner);
                        finish(r.owner, TxnState::Done);
                    } else {
                        schedule(later(cell_.proc_enb), {EvKind::StartStep, r.owner, t.attempt});
                    }
                }
                break;
            }
        }
    }

    void start_step(std::uint32_t slot) {
        auto& t = txns_[slot];
        if (t.step < static_cast<int>(plan_.size())) {
            t.state = TxnState::PostArpStep;
            const auto& msg = plan_[static_cast<std::size_t>(t.step)];
            t.hop_uplink = msg.uplink;
            t.hop_units = msg.units;
        } else {
            t.state = TxnState::DataTransfer;
            t.hop_uplink = true;
            t.hop_units = std::min(cat_.n_frag, t.rbs_remaining);
        }
        make_request(Channel::Pdcch, ReqKind::StepGrant, 1, now_ + cell_.t_other, slot, t.attempt, now_);
    }

    void expire(std::uint32_t id) {
        auto& r = requests_[id];
        if (r.pending) {
            r.pending = false;
            if (in_window_) ++result_.channels[idx(r.channel)].expired_requests;
            switch (r.kind) {
                case ReqKind::RarGrant:
                case ReqKind::RarData: {
                    auto& batch = batches_[r.owner];
                    for (auto g : batch.groups) {
                        for (auto slot : groups_[g].members) fail(slot);
                        groups_[g].members.clear();
                        groups_.release(g);
                    }
                    batch.groups.clear();
                    batches_.release(r.owner);
                    break;
                }
                case ReqKind::Msg3: {
                    auto& group = groups_[r.owner];
                    for (auto slot : group.members) fail(slot);
                    group.members.clear();
                    groups_.release(r.owner);
                    break;
                }
                default:
                    if (txns_[r.owner].attempt == r.attempt) fail(r.owner);
                    break;
            }
        }
        requests_.release(id);
    }

    void fail(std::uint32_t slot) {
        auto& t = txns_[slot];
        t.attempt = ++attempt_counter_;
        if (t.msg1_count >= cell_.m + 1) {
            log("drop", slot);
            finish(slot, TxnState::Dropped);
            return;
        }
        t.state = TxnState::AwaitingRao;
        t.backoff_until = now_ + backoff_(rng_);
        log("backoff", slot);
        awaiting_.push_back(slot);
    }

    void finish(std::uint32_t slot, TxnState state) {
        auto& t = txns_[slot];
        t.state = state;
        const bool ok = state == TxnState::Done;
        ok ? ++result_.finished_done : ++result_.finished_dropped;
        if (t.arrival >= warmup_) {
            ++result_.msg1_histogram[static_cast<std::size_t>(t.msg1_count)];
            if (ok) {
                ++result_.successes;
                latencies_.push_back(now_ - t.arrival);
            } else {
                ++result_.drops;
            }
        }
        txns_.release(slot);
    }

    void finalize() {
        result_.in_flight = result_.created - result_.finished_done - result_.finished_dropped;
        const auto finished = result_.successes + result_.drops;
        result_.outage_fraction = finished > 0 ? static_cast<double>(result_.drops) / finished : 0.0;
        if (!latencies_.empty()) {
            std::sort(latencies_.begin(), latencies_.end());
            double sum = 0.0;
            for (auto l : latencies_) sum += static_cast<double>(l);
            result_.latency_mean = sum / latencies_.size();
            auto rank = [&](double q) {
                auto i = static_cast<std::size_t>(std::ceil(q * latencies_.size()));
                return latencies_[std::min(latencies_.size() - 1, i == 0 ? 0 : i - 1)];
            };
            result_.latency_p50 = rank(0.50);
            result_.latency_p90 = rank(0.90);
            result_.latency_p99 = rank(0.99);
        }
    }

    const ScenarioSpec& spec_;
    const CellConfig& cell_;
    const SignalingCatalog& cat_;
    std::mt19937_64 rng_;
    std::int64_t duration_;
    std::int64_t warmup_;
    std::ostream* trace_;
    std::poisson_distribution<int> arrivals_;
    std::uniform_int_distribution<int> backoff_;
    std::uniform_int_distribution<int> preamble_;

    std::int64_t now_ = 0;
    bool in_window_ = false;
    bool prach_on_ = true;
    std::uint64_t next_id_ = 0;
    std::uint32_t attempt_counter_ = 0;  // globally unique, so reused slots never match stale events
    int data_rbs_ = 0;
    std::vector<Message> plan_;

    Slab<Txn> txns_;
    Slab<Request> requests_;
    Slab<RarBatch> batches_;
    Slab<PreambleGroup> groups_;
    std::vector<std::uint32_t> awaiting_;
    std::vector<int> preamble_slot_;
    std::array<std::deque<std::uint32_t>, 4> queues_;
    std::vector<std::vector<Event>> calendar_;
    std::vector<std::uint32_t> completed_;
    std::vector<std::int64_t> latencies_;
    SimResult result_;
};

}  // namespace

SimResult run(const ScenarioSpec& spec, std::uint64_t seed, std::int64_t duration, std::int64_t warmup,
              std::ostream* trace) {
    if (duration <= warmup || warmup < 0) throw std::invalid_argument("run: need duration > warmup >= 0");
    validate(spec);
    return Simulator(spec, seed, duration, warmup, trace).run();
}

}  // namespace ltearp

#include "flamesh/simnet.hpp"

#include <condition_variable>
#include <deque>
#include <exception>
#include <map>
#include <mutex>
#include <queue>
#include <thread>

#include "flamesh/error.hpp"

namespace flamesh {

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::uniform(std::uint64_t lo, std::uint64_t hi) {
  std::uint64_t span = hi - lo + 1;
  if (span == 0) return lo + next();
  return lo + next() % span;
}

double SplitMix64::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::string sim_ip(int node_id) { return "10.0.0." + std::to_string(node_id + 1); }

namespace {

// Unwinds a node program when the run is torn down. Deliberately not a
// flamesh::Error so application code does not swallow it.
struct SimAbort {};

struct Task {
  enum class State { kRunnable, kBlocked, kDone };

  int id = 0;
  State state = State::kRunnable;
  std::condition_variable cv;
  std::unique_lock<std::mutex>* lock = nullptr;
  std::uint64_t wake_token = 0;
  FlData result;
  std::exception_ptr error;
  std::thread thread;
};

struct Delivery {
  Endpoint dest;
  std::vector<std::uint8_t> bytes;
};

struct Wake {
  int task = 0;
  std::uint64_t token = 0;
};

struct Event {
  Duration at;
  std::uint64_t seq;
  std::variant<Delivery, Wake> what;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.at != b.at) return a.at > b.at;
    return a.seq > b.seq;
  }
};

thread_local Task* tl_task = nullptr;

class MemSource final : public ByteSource {
 public:
  explicit MemSource(std::span<const std::uint8_t> bytes) : rest_(bytes) {}

  std::size_t read_some(std::span<std::uint8_t> out) override {
    auto n = std::min(out.size(), rest_.size());
    std::copy_n(rest_.begin(), n, out.begin());
    rest_ = rest_.subspan(n);
    return n;
  }

 private:
  std::span<const std::uint8_t> rest_;
};

int node_of_port(int port) { return port - kBasePort; }

}  // namespace

struct SimNet::Impl {
  explicit Impl(SimConfig c) : cfg(c), rng(c.seed) {}

  SimConfig cfg;
  SplitMix64 rng;
  Duration now{0};
  std::uint64_t next_seq = 0;
  std::priority_queue<Event, std::vector<Event>, EventLater> events;
  std::map<std::pair<std::string, int>, ConnectionHandler> listeners;
  std::vector<std::vector<std::string>> logs;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;

  std::mutex mu;
  std::condition_variable sched_cv;
  std::deque<Task> tasks;
  int running = -1;
  bool aborting = false;

  void schedule(Duration at, std::variant<Delivery, Wake> what) {
    events.push(Event{at, next_seq++, std::move(what)});
  }

  void log(int node, const std::string& line) {
    if (!cfg.record_events || node < 0) return;
    if (logs.size() <= static_cast<std::size_t>(node)) logs.resize(static_cast<std::size_t>(node) + 1);
    logs[static_cast<std::size_t>(node)].push_back("t=" + std::to_string(now.count()) + "us " + line);
  }

  std::string describe_frame(const std::vector<std::uint8_t>& bytes) const {
    try {
      return describe(decode(bytes));
    } catch (const Error&) {
      return "raw bytes=" + std::to_string(bytes.size());
    }
  }

  void make_runnable(int task) {
    auto& t = tasks[static_cast<std::size_t>(task)];
    if (t.state == Task::State::kBlocked) t.state = Task::State::kRunnable;
  }

  // Called on a node thread that holds the baton. Returns when the
  // scheduler hands the baton back.
  void yield(Task& t) {
    running = -1;
    sched_cv.notify_one();
    t.cv.wait(*t.lock, [&] { return running == t.id || aborting; });
    if (aborting) throw SimAbort{};
  }

  void block(Task& t, std::optional<Duration> deadline) {
    if (deadline) schedule(*deadline, Wake{t.id, ++t.wake_token});
    t.state = Task::State::kBlocked;
    yield(t);
  }

  Task& require_task(const char* what) const {
    if (tl_task == nullptr)
      throw Error(ErrorCode::kSimDeadlock, std::string(what) + " would block outside SimNet::run");
    return *tl_task;
  }

  void process(Event& ev) {
    if (auto* w = std::get_if<Wake>(&ev.what)) {
      auto& t = tasks[static_cast<std::size_t>(w->task)];
      if (t.wake_token == w->token) make_runnable(w->task);
      return;
    }
    auto& d = std::get<Delivery>(ev.what);
    int dst = node_of_port(d.dest.port);
    auto it = listeners.find({d.dest.ip, d.dest.port});
    if (it == listeners.end()) {
      log(dst, "lost " + describe_frame(d.bytes));
      return;
    }
    if (cfg.record_events) log(dst, "recv dst=" + std::to_string(dst) + " " + describe_frame(d.bytes));
    ++delivered;
    MemSource src(d.bytes);
    auto handler = it->second;
    handler(src);
  }
};

namespace {

class SimInbox final : public Inbox {
 public:
  explicit SimInbox(SimNet::Impl& world) : world_(world) {}

  void push(Envelope env) override {
    if (closed_) return;
    queue_.push_back(std::move(env));
    wake_waiter();
  }

  void close() override {
    closed_ = true;
    wake_waiter();
  }

  Envelope pop(Timeout timeout) override {
    std::optional<Duration> deadline;
    if (timeout) deadline = world_.now + *timeout;
    for (;;) {
      if (!queue_.empty()) {
        Envelope env = std::move(queue_.front());
        queue_.pop_front();
        return env;
      }
      if (closed_) throw Error(ErrorCode::kClosed, "inbox closed");
      if (deadline && world_.now >= *deadline) throw Error(ErrorCode::kTimeout, "no message within timeout");
      Task& t = world_.require_task("Inbox::pop");
      waiter_ = t.id;
      try {
        world_.block(t, deadline);
      } catch (...) {
        waiter_ = -1;
        throw;
      }
      waiter_ = -1;
    }
  }

  std::size_t size() const override { return queue_.size(); }
  bool closed() const override { return closed_; }

 private:
  void wake_waiter() {
    if (waiter_ >= 0) world_.make_runnable(waiter_);
  }

  SimNet::Impl& world_;
  std::deque<Envelope> queue_;
  bool closed_ = false;
  int waiter_ = -1;
};

class SimListener final : public ListenerHandle {
 public:
  SimListener(SimNet::Impl& world, Endpoint ep) : world_(world), ep_(std::move(ep)) {}
  ~SimListener() override { stop(); }

  void stop() override {
    if (stopped_) return;
    stopped_ = true;
    world_.listeners.erase({ep_.ip, ep_.port});
  }

 private:
  SimNet::Impl& world_;
  Endpoint ep_;
  bool stopped_ = false;
};

class SimSink final : public ByteSink {
 public:
  SimSink(SimNet::Impl& world, Endpoint dest) : world_(world), dest_(std::move(dest)) {}

  bool write(std::span<const std::uint8_t> bytes) override {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    return true;
  }

  bool close() override {
    if (closed_) return true;
    closed_ = true;
    auto& cfg = world_.cfg;
    auto lo = static_cast<std::uint64_t>(std::chrono::duration_cast<Duration>(cfg.delay_min).count());
    auto hi = static_cast<std::uint64_t>(std::chrono::duration_cast<Duration>(cfg.delay_max).count());
    Duration delay(static_cast<Duration::rep>(world_.rng.uniform(lo, hi)));
    bool drop = cfg.drop_probability > 0.0 && world_.rng.unit() < cfg.drop_probability;

    int src = tl_task ? tl_task->id : -1;
    int dst = node_of_port(dest_.port);
    if (cfg.record_events) {
      world_.log(src, std::string(drop ? "drop" : "send") + " src=" + std::to_string(src) +
                          " dst=" + std::to_string(dst) + " " + world_.describe_frame(buf_));
    }
    if (drop) {
      ++world_.dropped;
      return true;
    }
    world_.schedule(world_.now + delay, Delivery{dest_, std::move(buf_)});
    return true;
  }

 private:
  SimNet::Impl& world_;
  Endpoint dest_;
  std::vector<std::uint8_t> buf_;
  bool closed_ = false;
};

}  // namespace

SimNet::SimNet(SimConfig cfg) : impl_(std::make_unique<Impl>(cfg)) {
  if (cfg.delay_min > cfg.delay_max) throw Error(ErrorCode::kInvalidArgs, "delay_min > delay_max");
  if (cfg.drop_probability < 0.0 || cfg.drop_probability >= 1.0)
    throw Error(ErrorCode::kInvalidArgs, "drop_probability must be in [0, 1)");
}

SimNet::~SimNet() = default;

std::unique_ptr<ListenerHandle> SimNet::listen(const Endpoint& ep, ConnectionHandler handler) {
  auto key = std::make_pair(ep.ip, ep.port);
  if (impl_->listeners.count(key)) throw Error(ErrorCode::kDuplicateBind, to_string(ep) + " already bound");
  impl_->listeners.emplace(key, std::move(handler));
  return std::make_unique<SimListener>(*impl_, ep);
}

std::unique_ptr<ByteSink> SimNet::connect(const Endpoint& ep) {
  if (!impl_->listeners.count({ep.ip, ep.port})) return nullptr;
  return std::make_unique<SimSink>(*impl_, ep);
}

std::shared_ptr<Inbox> SimNet::make_inbox() { return std::make_shared<SimInbox>(*impl_); }

void SimNet::sleep_for(Duration d) {
  Task& t = impl_->require_task("sleep_for");
  auto until = impl_->now + d;
  while (impl_->now < until) impl_->block(t, until);
}

Duration SimNet::now() const { return impl_->now; }

const std::vector<std::string>& SimNet::events(int node_id) const {
  static const std::vector<std::string> kEmpty;
  if (node_id < 0 || static_cast<std::size_t>(node_id) >= impl_->logs.size()) return kEmpty;
  return impl_->logs[static_cast<std::size_t>(node_id)];
}

std::uint64_t SimNet::frames_delivered() const { return impl_->delivered; }
std::uint64_t SimNet::frames_dropped() const { return impl_->dropped; }

std::vector<FlData> SimNet::run(const std::vector<NodeMain>& mains) {
  auto& w = *impl_;
  if (!w.tasks.empty()) throw Error(ErrorCode::kInvalidArgs, "SimNet::run may only be called once");
  const int n = static_cast<int>(mains.size());
  if (n < 1) throw Error(ErrorCode::kInvalidArgs, "need at least one node");

  std::unique_lock lk(w.mu);
  for (int i = 0; i < n; ++i) {
    auto& t = w.tasks.emplace_back();
    t.id = i;
  }
  for (int i = 0; i < n; ++i) {
    auto& t = w.tasks[static_cast<std::size_t>(i)];
    t.thread = std::thread([&w, &t, &main = mains[static_cast<std::size_t>(i)], n, this] {
      std::unique_lock tlk(w.mu);
      tl_task = &t;
      t.lock = &tlk;
      t.cv.wait(tlk, [&] { return w.running == t.id || w.aborting; });
      if (!w.aborting) {
        try {
          NodeEnv env{n, t.id, sim_ip(t.id), *this};
          t.result = main(env);
        } catch (const SimAbort&) {
        } catch (...) {
          t.error = std::current_exception();
        }
      }
      t.state = Task::State::kDone;
      tl_task = nullptr;
      if (w.running == t.id) {
        w.running = -1;
        w.sched_cv.notify_one();
      }
    });
  }

  std::exception_ptr failure;
  for (;;) {
    Task* next = nullptr;
    for (auto& t : w.tasks) {
      if (t.state == Task::State::kRunnable) {
        next = &t;
        break;
      }
    }
    if (next) {
      w.running = next->id;
      next->cv.notify_one();
      w.sched_cv.wait(lk, [&] { return w.running == -1; });
      if (next->state == Task::State::kDone && next->error) {
        try {
          std::rethrow_exception(next->error);
        } catch (const Error& e) {
          failure = std::make_exception_ptr(NodeError(next->id, e.code(), e.what()));
        } catch (const std::exception& e) {
          failure = std::make_exception_ptr(NodeError(next->id, ErrorCode::kNodeError, e.what()));
        } catch (...) {
          failure = std::make_exception_ptr(NodeError(next->id, ErrorCode::kNodeError, "unknown exception"));
        }
        break;
      }
      continue;
    }
    bool all_done = true;
    for (auto& t : w.tasks) all_done = all_done && t.state == Task::State::kDone;
    if (all_done) break;
    if (w.events.empty()) {
      std::string blocked;
      for (auto& t : w.tasks)
        if (t.state == Task::State::kBlocked) blocked += " " + std::to_string(t.id);
      failure = std::make_exception_ptr(
          Error(ErrorCode::kSimDeadlock, "nothing left to deliver; blocked nodes:" + blocked));
      break;
    }
    Event ev = w.events.top();
    w.events.pop();
    if (ev.at > w.cfg.horizon) {
      failure = std::make_exception_ptr(Error(ErrorCode::kSimDeadlock, "virtual time horizon exceeded"));
      break;
    }
    if (ev.at > w.now) w.now = ev.at;
    w.process(ev);
  }

  w.aborting = true;
  for (auto& t : w.tasks) t.cv.notify_one();
  lk.unlock();
  for (auto& t : w.tasks) t.thread.join();

  if (failure) std::rethrow_exception(failure);
  std::vector<FlData> results;
  results.reserve(w.tasks.size());
  for (auto& t : w.tasks) results.push_back(std::move(t.result));
  return results;
}

std::unique_ptr<NetBackend> sim_backend(const SimConfig& cfg) { return std::make_unique<SimNet>(cfg); }

std::vector<FlData> run_nodes(const std::vector<NodeMain>& mains, const SimConfig& cfg) {
  SimNet net(cfg);
  return net.run(mains);
}

}  // namespace flamesh

#include <gtest/gtest.h>

#include <dirent.h>
#include <unistd.h>

#include <chrono>
#include <fstream>

#include "vpbo/external_objective.hpp"

using namespace vpbo;

namespace {

const std::string kFixture = ECHO_OBJECTIVE_PATH;

int open_fd_count() {
  int n = 0;
  if (DIR* d = ::opendir("/proc/self/fd")) {
    while (::readdir(d)) ++n;
    ::closedir(d);
  }
  return n;
}

/// Live (non-zombie) or zombie children of this process.
int child_count() {
  int n = 0;
  const pid_t self = ::getpid();
  if (DIR* d = ::opendir("/proc")) {
    while (dirent* e = ::readdir(d)) {
      if (e->d_name[0] < '0' || e->d_name[0] > '9') continue;
      std::ifstream in(std::string("/proc/") + e->d_name + "/stat");
      std::string stat;
      std::getline(in, stat);
      const auto close = stat.rfind(')');
      if (close == std::string::npos) continue;
      std::istringstream rest(stat.substr(close + 2));
      char state;
      pid_t ppid;
      rest >> state >> ppid;
      n += ppid == self;
    }
    ::closedir(d);
  }
  return n;
}

MixedPoint point(std::vector<int> h, double a, double b) { return {std::move(h), Eigen::Vector2d(a, b)}; }

} // namespace

TEST(Protocol, EncodeRequest) {
  const std::string s = encode_request(point({1, 2}, 0.25, 0.5));
  EXPECT_EQ(s.back(), '\n');
  const auto j = nlohmann::json::parse(s);
  EXPECT_EQ(j["h"], (std::vector<int>{1, 2}));
  EXPECT_EQ(j["x"], (std::vector<double>{0.25, 0.5}));
}

TEST(Protocol, DecodeResponse) {
  EXPECT_EQ(decode_response("{\"y\": 1.5}"), 1.5);
  EXPECT_THROW(decode_response("nonsense"), ProtocolError);
  EXPECT_THROW(decode_response("[1,2]"), ProtocolError);
  EXPECT_THROW(decode_response("{\"y\": \"1\"}"), ProtocolError);
  try {
    decode_response("{\"error\": \"bad input\"}");
    FAIL();
  } catch (const ProtocolError&) {
    FAIL() << "an error reply is not a protocol violation";
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("bad input"), std::string::npos);
  }
}

TEST(ExternalObjective, RoundTrip) {
  ExternalObjective f({kFixture, "sum"});
  EXPECT_DOUBLE_EQ(f(point({1, 2}, 0.25, 0.5)), 3.75);
  EXPECT_DOUBLE_EQ(f(point({0, 0}, 0.125, 0.0)), 0.125);
  EXPECT_TRUE(f.running());
}

TEST(ExternalObjective, MalformedResponseIsProtocolError) {
  ExternalObjective f({kFixture, "malformed"});
  EXPECT_THROW(f(point({0}, 0.1, 0.1)), ProtocolError);
  ExternalObjective g({kFixture, "noy"});
  EXPECT_THROW(g(point({0}, 0.1, 0.1)), ProtocolError);
}

TEST(ExternalObjective, ErrorReplyIsEvaluationError) {
  ExternalObjective f({kFixture, "error"});
  EXPECT_THROW(f(point({0}, 0.1, 0.1)), EvaluationError);
}

TEST(ExternalObjective, TimeoutKillsChild) {
  ExternalObjective f({kFixture, "sleep", "5"}, 0.2);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    f(point({0}, 0.1, 0.1));
    FAIL();
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("timed out"), std::string::npos);
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 2.0);
  EXPECT_FALSE(f.running());
}

TEST(ExternalObjective, ExitReportsStatus) {
  ExternalObjective f({kFixture, "exit", "7"});
  try {
    f(point({0}, 0.1, 0.1));
    FAIL();
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("exit status 7"), std::string::npos);
  }
}

TEST(ExternalObjective, MissingExecutable) {
  ExternalObjective f({"/nonexistent/objective-binary"});
  EXPECT_THROW(f(point({0}, 0.1, 0.1)), EvaluationError);
}

TEST(ExternalObjective, RestartsAfterFailure) {
  ExternalObjective f({kFixture, "sleep", "0.5"}, 0.1);
  EXPECT_THROW(f(point({0}, 0.1, 0.1)), EvaluationError);
  EXPECT_FALSE(f.running());
}

TEST(ExternalObjective, NoLeaksOverAThousandEvaluations) {
  const int fds = open_fd_count();
  const int kids = child_count();
  {
    ExternalObjective f({kFixture, "sum"});
    for (int i = 0; i < 1000; ++i) ASSERT_DOUBLE_EQ(f(point({i % 3}, 0.5, 0.25)), 0.75 + i % 3);
  }
  for (int i = 0; i < 20; ++i) {
    ExternalObjective g({kFixture, "malformed"});
    EXPECT_THROW(g(point({0}, 0.1, 0.1)), ProtocolError);
    ExternalObjective h({kFixture, "exit", "1"});
    EXPECT_THROW(h(point({0}, 0.1, 0.1)), EvaluationError);
  }
  EXPECT_EQ(open_fd_count(), fds);
  EXPECT_EQ(child_count(), kids);
}

TEST(ExternalObjective, MoveTransfersTheProcess) {
  ExternalObjective f({kFixture, "sum"});
  EXPECT_DOUBLE_EQ(f(point({1}, 0.0, 0.0)), 1.0);
  const pid_t pid = f.pid();
  ExternalObjective g(std::move(f));
  EXPECT_EQ(g.pid(), pid);
  EXPECT_FALSE(f.running());
  EXPECT_DOUBLE_EQ(g(point({2}, 0.0, 0.0)), 2.0);
}

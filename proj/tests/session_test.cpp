#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "tia/session.hpp"

namespace {

using namespace tia;

class FakeServices : public SessionServices {
 public:
  std::uint16_t open_data_connection(Transport transport) override {
    data_calls.push_back(transport);
    if (fail_data) throw Error(Errc::kIo, "no ports left");
    return next_port++;
  }
  std::uint16_t open_state_connection() override {
    ++state_calls;
    return next_port++;
  }

  std::uint16_t next_port = 4000;
  std::vector<Transport> data_calls;
  int state_calls = 0;
  bool fail_data = false;
};

std::string description_of(const ControlMessage& reply) {
  const auto* err = reply.get<msg::Error>();
  if (err == nullptr || !err->content) return {};
  return parse_error_xml(*err->content).description.value_or("");
}

TEST(Session, CheckProtocolVersionIsOk) {
  FakeServices services;
  const auto r = handle_command({}, msg::CheckProtocolVersion{}, "", services);
  EXPECT_TRUE(r.reply.is<msg::Ok>());
  EXPECT_EQ(r.session, ClientSession{});
}

TEST(Session, GetMetaInfoCarriesDocument) {
  FakeServices services;
  const auto r = handle_command({}, msg::GetMetaInfo{}, "<tiaMetaInfo version=\"1.0\"/>", services);
  ASSERT_TRUE(r.reply.is<msg::MetaInfo>());
  EXPECT_EQ(r.reply.get<msg::MetaInfo>()->content, "<tiaMetaInfo version=\"1.0\"/>");
}

TEST(Session, StartWithoutDataConnectionIsRefused) {
  FakeServices services;
  const auto r = handle_command({}, msg::StartDataTransmission{}, "", services);
  ASSERT_TRUE(r.reply.is<msg::Error>());
  EXPECT_FALSE(description_of(r.reply).empty());
  EXPECT_FALSE(r.session.transmitting);
}

TEST(Session, DataConnectionIsIdempotent) {
  FakeServices services;
  auto r = handle_command({}, msg::GetDataConnection{Transport::kTcp}, "", services);
  ASSERT_TRUE(r.reply.is<msg::DataConnectionPort>());
  const std::uint16_t port = r.reply.get<msg::DataConnectionPort>()->port;
  r = handle_command(r.session, msg::GetDataConnection{Transport::kTcp}, "", services);
  ASSERT_TRUE(r.reply.is<msg::DataConnectionPort>());
  EXPECT_EQ(r.reply.get<msg::DataConnectionPort>()->port, port);
  EXPECT_EQ(services.data_calls.size(), 1u);
  EXPECT_EQ(r.session.data, (DataTransport{Transport::kTcp, port}));
}

TEST(Session, OtherTransportIsRefused) {
  FakeServices services;
  auto r = handle_command({}, msg::GetDataConnection{Transport::kUdp}, "", services);
  const ClientSession before = r.session;
  r = handle_command(r.session, msg::GetDataConnection{Transport::kTcp}, "", services);
  EXPECT_TRUE(r.reply.is<msg::Error>());
  EXPECT_EQ(r.session, before);
}

TEST(Session, ServiceFailureBecomesErrorReply) {
  FakeServices services;
  services.fail_data = true;
  const auto r = handle_command({}, msg::GetDataConnection{Transport::kTcp}, "", services);
  ASSERT_TRUE(r.reply.is<msg::Error>());
  EXPECT_NE(description_of(r.reply).find("no ports left"), std::string::npos);
  EXPECT_FALSE(r.session.data.has_value());
}

TEST(Session, StartStopCycle) {
  FakeServices services;
  auto r = handle_command({}, msg::GetDataConnection{Transport::kTcp}, "", services);
  r = handle_command(r.session, msg::StartDataTransmission{}, "", services);
  EXPECT_TRUE(r.reply.is<msg::Ok>());
  EXPECT_TRUE(r.session.transmitting);
  r = handle_command(r.session, msg::StartDataTransmission{}, "", services);
  EXPECT_TRUE(r.reply.is<msg::Error>());
  EXPECT_TRUE(r.session.transmitting);
  r = handle_command(r.session, msg::StopDataTransmission{}, "", services);
  EXPECT_TRUE(r.reply.is<msg::Ok>());
  EXPECT_FALSE(r.session.transmitting);
  r = handle_command(r.session, msg::StopDataTransmission{}, "", services);
  EXPECT_TRUE(r.reply.is<msg::Error>());
}

TEST(Session, StateConnectionIsIdempotent) {
  FakeServices services;
  auto r = handle_command({}, msg::GetServerStateConnection{}, "", services);
  ASSERT_TRUE(r.reply.is<msg::ServerStateConnectionPort>());
  const auto port = r.reply.get<msg::ServerStateConnectionPort>()->port;
  r = handle_command(r.session, msg::GetServerStateConnection{}, "", services);
  EXPECT_EQ(r.reply.get<msg::ServerStateConnectionPort>()->port, port);
  EXPECT_EQ(services.state_calls, 1);
}

TEST(Session, NonCommandsAreRefused) {
  FakeServices services;
  for (const ControlMessage& m : std::vector<ControlMessage>{msg::Ok{}, msg::ServerStateRunning{},
                                                             msg::DataConnectionPort{5}, msg::MetaInfo{"x"}}) {
    const auto r = handle_command({}, m, "", services);
    EXPECT_TRUE(r.reply.is<msg::Error>());
    EXPECT_FALSE(description_of(r.reply).empty());
  }
}

// Random command sequences: transmitting implies a data connection, refusals change nothing.
TEST(Session, PropertyTransmittingImpliesDataConnection) {
  std::mt19937_64 rng(7);
  const std::vector<ControlMessage> commands = {
      msg::CheckProtocolVersion{},   msg::GetMetaInfo{},         msg::GetDataConnection{Transport::kTcp},
      msg::GetDataConnection{Transport::kUdp}, msg::StartDataTransmission{}, msg::StopDataTransmission{},
      msg::GetServerStateConnection{}, msg::Ok{}};
  for (int run = 0; run < 200; ++run) {
    FakeServices services;
    ClientSession s;
    for (int step = 0; step < 30; ++step) {
      const auto& cmd = commands[rng() % commands.size()];
      const auto r = handle_command(s, cmd, "", services);
      if (r.session.transmitting) {
        ASSERT_TRUE(r.session.data.has_value());
      }
      if (s.data) {
        ASSERT_EQ(r.session.data, s.data);
      }
      if (r.reply.is<msg::Error>()) {
        ASSERT_EQ(r.session, s);
      }
      s = r.session;
    }
    EXPECT_LE(services.data_calls.size(), 1u);
  }
}

}  // namespace

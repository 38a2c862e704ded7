#include <gtest/gtest.h>

#include <future>
#include <set>
#include <thread>

#include "segnet_support.hpp"
#include "test_support.hpp"
#include "volseg/service/server.hpp"

namespace volseg::service {
namespace {

using nlohmann::json;

segnet::Weights<float> tiny_weights() { return segnet::initialize_weights<float>(testing::micro_config()); }

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ServiceOptions opts;
    opts.weights["T2"] = tiny_weights();
    opts.workers = 1;
    service_ = std::make_unique<Service>(std::move(opts));
    service_->mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  std::string upload(const std::vector<std::uint8_t>& bytes) {
    auto res = client_->Post("/volumes", std::string(bytes.begin(), bytes.end()), "application/octet-stream");
    EXPECT_EQ(res->status, 201) << res->body;
    return json::parse(res->body)["volume_id"];
  }

  json wait_for_job(const std::string& id) {
    for (int i = 0; i < 500; ++i) {
      auto res = client_->Get("/jobs/" + id);
      const auto j = json::parse(res->body);
      if (j["state"] == "done" || j["state"] == "error") return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ADD_FAILURE() << "job " << id << " did not finish";
    return {};
  }

  httplib::Server server_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(ServiceTest, HealthListsModalities) {
  auto res = client_->Get("/health");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["modalities"], json::array({"T2"}));
}

TEST_F(ServiceTest, UploadAndSlice) {
  const std::string id = upload(testing::fixture_2x2x2());
  auto info = client_->Get("/volumes/" + id);
  ASSERT_EQ(info->status, 200);
  EXPECT_EQ(json::parse(info->body)["dims"], json::array({2, 2, 2}));

  auto res = client_->Get("/volumes/" + id + "/slices/z/1?lo=0&hi=7");
  ASSERT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(res->get_header_value("X-Slice-Width"), "2");
  const auto png = decode_png(std::vector<std::uint8_t>(res->body.begin(), res->body.end()));
  EXPECT_EQ(png.width, 2u);
  EXPECT_EQ(png.height, 2u);
  EXPECT_EQ(png.channels, 1);
  // z = 1 holds values 4..7, windowed over [0, 7].
  EXPECT_EQ(png.pixels, (std::vector<std::uint8_t>{146, 182, 219, 255}));
}

TEST_F(ServiceTest, OutOfRangeSliceNamesTheExtent) {
  const std::string id = upload(testing::fixture_2x2x2());
  for (const char* idx : {"2", "-1"}) {
    auto res = client_->Get("/volumes/" + id + "/slices/x/" + idx);
    ASSERT_EQ(res->status, 400);
    const auto j = json::parse(res->body);
    EXPECT_EQ(j["error"], "InvalidArgument");
    EXPECT_NE(j["message"].get<std::string>().find("extent 2"), std::string::npos) << j;
  }
  EXPECT_EQ(client_->Get("/volumes/" + id + "/slices/w/0")->status, 400);
  EXPECT_EQ(client_->Get("/volumes/vol-999/slices/z/0")->status, 404);
}

TEST_F(ServiceTest, BadUploadsAreRejected) {
  const auto bad = testing::fixture_2x2x2(false, "x+1");
  auto res = client_->Post("/volumes", std::string(bad.begin(), bad.end()), "application/octet-stream");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"], "BadMagic");
  EXPECT_EQ(client_->Post("/volumes", "", "application/octet-stream")->status, 400);
}

TEST_F(ServiceTest, UnknownIds) {
  EXPECT_EQ(client_->Get("/jobs/job-42")->status, 404);
  EXPECT_EQ(client_->Get("/masks/mask-42/volume-ml")->status, 404);
  EXPECT_EQ(client_->Get("/volumes/vol-42")->status, 404);
  auto res = client_->Post("/segment", R"({"volume_id":"vol-42"})", "application/json");
  EXPECT_EQ(res->status, 404);
}

TEST_F(ServiceTest, SegmentValidation) {
  const std::string id = upload(testing::fixture_2x2x2());
  auto res = client_->Post("/segment", json{{"volume_id", id}, {"modality", "PD"}}.dump(), "application/json");
  EXPECT_EQ(res->status, 400);
  res = client_->Post("/segment", json{{"volume_id", id}, {"modality", "T1"}}.dump(), "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_NE(res->body.find("no weights"), std::string::npos);
  EXPECT_EQ(client_->Post("/segment", "not json", "application/json")->status, 400);
}

TEST_F(ServiceTest, SegmentVolumeAndDownload) {
  const std::string id = upload(testing::fixture_2x2x2());
  auto res = client_->Post("/segment", json{{"volume_id", id}}.dump(), "application/json");
  ASSERT_EQ(res->status, 202) << res->body;
  const auto rec = json::parse(res->body);
  EXPECT_EQ(rec["kind"], "segment");
  const std::string mask_id = rec["inputs"]["mask_id"];
  const auto done = wait_for_job(rec["job_id"]);
  ASSERT_EQ(done["state"], "done") << done;
  EXPECT_EQ(done["result"]["mask_id"], mask_id);

  auto ml = client_->Get("/masks/" + mask_id + "/volume-ml");
  ASSERT_EQ(ml->status, 200);
  const double reported = json::parse(ml->body)["ml"];

  auto dl = client_->Get("/masks/" + mask_id + "/download");
  ASSERT_EQ(dl->status, 200);
  const auto mask = LabelMask::from_grid(nifti::read_nifti(std::vector<std::uint8_t>(dl->body.begin(), dl->body.end())).grid);
  EXPECT_EQ(reported, volumes(SegmentationPair(mask, mask)).pred_ml);
  EXPECT_EQ(mask.dims(), (Dims{2, 2, 2}));

  auto overlay = client_->Get("/volumes/" + id + "/slices/y/0?overlay=" + mask_id);
  ASSERT_EQ(overlay->status, 200);
  const auto png = decode_png(std::vector<std::uint8_t>(overlay->body.begin(), overlay->body.end()));
  EXPECT_EQ(png.channels, 2);
  for (std::size_t i = 1; i < png.pixels.size(); i += 2) EXPECT_TRUE(png.pixels[i] == 0 || png.pixels[i] == 255);
}

TEST_F(ServiceTest, MaskIsNotReadyWhileJobIsQueued) {
  std::promise<void> release;
  auto gate = release.get_future().share();
  service_->jobs().submit(JobKind::kStudy, {}, [gate] {
    gate.wait();
    return json{};
  });
  const std::string id = upload(testing::fixture_2x2x2());
  auto res = client_->Post("/segment", json{{"volume_id", id}}.dump(), "application/json");
  ASSERT_EQ(res->status, 202);
  const auto rec = json::parse(res->body);
  EXPECT_EQ(rec["state"], "queued");
  const std::string mask_id = rec["inputs"]["mask_id"];
  auto pending = client_->Get("/masks/" + mask_id + "/volume-ml");
  EXPECT_EQ(pending->status, 409);
  EXPECT_EQ(json::parse(pending->body)["error"], "NotReady");
  release.set_value();
  EXPECT_EQ(wait_for_job(rec["job_id"])["state"], "done");
  EXPECT_EQ(client_->Get("/masks/" + mask_id + "/volume-ml")->status, 200);
}

TEST_F(ServiceTest, MetricsEndpoint) {
  const auto m = testing::box_mask(Geometry({4, 4, 4}, {1, 1, 1}), {0, 0, 0}, {2, 2, 2});
  const auto bytes = nifti::write_mask(m, false);
  auto up = client_->Post("/masks", std::string(bytes.begin(), bytes.end()), "application/octet-stream");
  ASSERT_EQ(up->status, 201);
  const std::string a = json::parse(up->body)["mask_id"];
  auto res = client_->Post("/metrics", json{{"pred", a}, {"ref", a}}.dump(), "application/json");
  ASSERT_EQ(res->status, 200);
  const auto j = json::parse(res->body);
  EXPECT_EQ(j["dsc"], 1.0);
  EXPECT_EQ(j["hd95_mm"], 0.0);
  EXPECT_EQ(j["counts"]["tp"], 8);

  const std::string vol = upload(testing::fixture_2x2x2());
  auto mismatch = client_->Post("/masks?volume_id=" + vol, std::string(bytes.begin(), bytes.end()),
                                "application/octet-stream");
  EXPECT_EQ(mismatch->status, 400);
  EXPECT_EQ(json::parse(mismatch->body)["error"], "GeometryMismatch");
}

TEST_F(ServiceTest, ConcurrentUploadsGetDistinctIds) {
  const auto bytes = testing::fixture_2x2x2();
  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 8; ++i) {
    futures.push_back(std::async(std::launch::async, [&] {
      httplib::Client c("127.0.0.1", port_);
      auto res = c.Post("/volumes", std::string(bytes.begin(), bytes.end()), "application/octet-stream");
      return json::parse(res->body)["volume_id"].get<std::string>();
    }));
  }
  std::set<std::string> ids;
  for (auto& f : futures) ids.insert(f.get());
  EXPECT_EQ(ids.size(), 8u);
}

TEST_F(ServiceTest, CorsPreflight) {
  auto res = client_->Options("/segment");
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(JobQueue, FifoWithOneWorker) {
  JobQueue q(1, 16);
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back(q.submit(JobKind::kEvaluate, {{"i", i}}, [i] { return json{{"i", i}}; }).job_id);
  q.wait_idle();
  EXPECT_EQ(q.completion_order(), ids);
  EXPECT_EQ(q.get(ids[3])->result["i"], 3);
}

TEST(JobQueue, ErrorsAndCapacity) {
  JobQueue q(1, 2);
  std::promise<void> release;
  auto gate = release.get_future().share();
  const auto blocker = q.submit(JobKind::kStudy, {}, [gate] {
    gate.wait();
    return json{};
  });
  // Wait until the blocker is running so the two slots are free.
  while (q.get(blocker.job_id)->state != JobState::kRunning) std::this_thread::yield();
  const auto failing = q.submit(JobKind::kEvaluate, {}, []() -> json { throw InvalidArgument("boom"); });
  q.submit(JobKind::kEvaluate, {}, [] { return json{}; });
  EXPECT_THROW(q.submit(JobKind::kEvaluate, {}, [] { return json{}; }), QueueFull);
  release.set_value();
  q.wait_idle();
  const auto rec = q.get(failing.job_id);
  EXPECT_EQ(rec->state, JobState::kError);
  EXPECT_NE(rec->error.find("boom"), std::string::npos);
  EXPECT_FALSE(q.get("job-99").has_value());
}

TEST(JobQueue, TransitionsAreMonotone) {
  EXPECT_TRUE(legal_transition(JobState::kQueued, JobState::kRunning));
  EXPECT_TRUE(legal_transition(JobState::kRunning, JobState::kDone));
  EXPECT_TRUE(legal_transition(JobState::kRunning, JobState::kError));
  EXPECT_FALSE(legal_transition(JobState::kDone, JobState::kRunning));
  EXPECT_FALSE(legal_transition(JobState::kQueued, JobState::kDone));
  EXPECT_FALSE(legal_transition(JobState::kError, JobState::kQueued));
}

}  // namespace
}  // namespace volseg::service

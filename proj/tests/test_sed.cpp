#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <thread>

#include "cadenet/sed.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cadenet;

namespace {

Eigen::VectorXf unit(std::initializer_list<float> v) {
  Eigen::VectorXf e(static_cast<int>(v.size()));
  int i = 0;
  for (float f : v) e(i++) = f;
  return e / e.norm();
}

Eigen::VectorXf random_unit(int dim, std::mt19937& g) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  Eigen::VectorXf e(dim);
  for (int i = 0; i < dim; ++i) e(i) = n(g);
  return e / e.norm();
}

sed::SedEntry entry(Eigen::VectorXf e, float delta, Condition c = Condition::Fog) {
  sed::SedEntry s;
  s.embedding = std::move(e);
  s.condition = c;
  s.params.condition = c;
  s.params.dcp_kernel = 15.0f;
  s.delta_f1 = delta;
  return s;
}

}  // namespace

TEST_SUITE("sed") {
  TEST_CASE("knn: self at rank 1, orthogonal at similarity 0") {
    sed::SedDatabase db(4);
    auto q = unit({1, 0, 0, 0});
    db.append(entry(q, 0.1f));
    db.append(entry(unit({0, 1, 0, 0}), 0.2f));
    auto nn = db.knn(q, 5);
    REQUIRE(nn.size() == 2);
    CHECK(nn[0].second == doctest::Approx(1.0));
    CHECK(nn[1].second == doctest::Approx(0.0));
  }

  TEST_CASE("knn equals the full-scan sort oracle at D=8") {
    auto g = testutil::rng(401);
    sed::SedDatabase db(8);
    std::vector<Eigen::VectorXf> all;
    for (int i = 0; i < 50; ++i) {
      auto e = random_unit(8, g);
      all.push_back(e);
      db.append(entry(e, static_cast<float>(i) / 50.0f));
    }
    for (int it = 0; it < 100; ++it) {
      auto q = random_unit(8, g);
      auto got = db.knn(q, 5);
      // oracle: full similarity scan, stable sort
      std::vector<std::pair<float, int>> sims;
      for (int i = 0; i < 50; ++i) sims.emplace_back(all[i].dot(q), i);
      std::stable_sort(sims.begin(), sims.end(),
                       [](auto& a, auto& b) { return a.first > b.first; });
      REQUIRE(got.size() == 5);
      for (int i = 0; i < 5; ++i) CHECK(got[i].second == doctest::Approx(sims[i].first));
    }
  }

  TEST_CASE("knn on an empty database is empty") {
    sed::SedDatabase db(8);
    auto g = testutil::rng(403);
    CHECK(db.knn(random_unit(8, g), 5).empty());
  }

  TEST_CASE("neighbour score follows Eq. 5 exactly") {
    CHECK(sed::neighbour_score(0.8, 0.1) == doctest::Approx(0.8 * std::exp(0.2)).epsilon(1e-12));
    // 0.8 e^0.2 beats 0.95 e^0.002
    CHECK(sed::neighbour_score(0.8, 0.1) > sed::neighbour_score(0.95, 0.001));
  }

  TEST_CASE("recommend filters to strictly positive delta_f1") {
    sed::SedDatabase db(4);
    db.append(entry(unit({1, 0, 0, 0}), 0.0f));
    db.append(entry(unit({0.9f, 0.1f, 0, 0}), -0.3f));
    auto q = unit({1, 0, 0, 0});
    CHECK(!db.recommend(q).has_value());

    auto winner = entry(unit({0.8f, 0.2f, 0, 0}), 0.1f, Condition::Rain);
    winner.params.clahe_clip = 1.75f;
    db.append(winner);
    auto rec = db.recommend(q);
    REQUIRE(rec.has_value());
    CHECK(rec->condition == Condition::Rain);
    CHECK(rec->clahe_clip == doctest::Approx(1.75f));
  }

  TEST_CASE("higher delta_f1 never ranks lower at fixed similarity") {
    sed::SedDatabase db(4);
    auto e = unit({1, 0, 0, 0});
    auto weak = entry(e, 0.05f, Condition::Sand);
    weak.params.clahe_clip = 1.0f;
    auto strong = entry(e, 0.4f, Condition::Snow);
    strong.params.clahe_clip = 9.0f;
    db.append(weak);
    db.append(strong);
    auto rec = db.recommend(e);
    REQUIRE(rec.has_value());
    CHECK(rec->condition == Condition::Snow);
  }

  TEST_CASE("append rejects non-normalized embeddings") {
    sed::SedDatabase db(4);
    sed::SedEntry bad;
    bad.embedding = Eigen::VectorXf::Constant(4, 1.0f);
    CHECK_THROWS_AS(db.append(bad), std::invalid_argument);
    sed::SedEntry wrong_dim;
    wrong_dim.embedding = unit({1, 0, 0});
    CHECK_THROWS_AS(db.append(wrong_dim), std::invalid_argument);
  }

  TEST_CASE("persistence round-trip preserves knn results") {
    const std::string path = "/tmp/cadenet_sed_test.bin";
    std::remove(path.c_str());
    auto g = testutil::rng(405);
    {
      sed::SedDatabase db(8);
      db.attach_file(path);
      for (int i = 0; i < 20; ++i)
        db.append(entry(random_unit(8, g), static_cast<float>(i % 5) * 0.1f,
                        static_cast<Condition>(i % 5)));
      CHECK(db.size() == 20);
    }
    auto reloaded = sed::SedDatabase::load(path);
    CHECK(reloaded.size() == 20);
    CHECK(reloaded.dim() == 8);
    auto g2 = testutil::rng(405);
    sed::SedDatabase fresh(8);
    for (int i = 0; i < 20; ++i)
      fresh.append(entry(random_unit(8, g2), static_cast<float>(i % 5) * 0.1f,
                         static_cast<Condition>(i % 5)));
    auto q = random_unit(8, g);
    auto a = reloaded.knn(q, 5);
    auto b = fresh.knn(q, 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].second == doctest::Approx(b[i].second));
      CHECK(a[i].first->condition == b[i].first->condition);
      CHECK(a[i].first->delta_f1 == doctest::Approx(b[i].first->delta_f1));
    }
    std::remove(path.c_str());
  }

  TEST_CASE("append-then-query hits rank 1; db size grows") {
    auto g = testutil::rng(407);
    sed::SedDatabase db(8);
    for (int i = 0; i < 10; ++i) db.append(entry(random_unit(8, g), 0.0f));
    auto q = random_unit(8, g);
    db.append(entry(q, 0.2f));
    CHECK(db.size() == 11);
    auto nn = db.knn(q, 1);
    REQUIRE(nn.size() == 1);
    CHECK(nn[0].second == doctest::Approx(1.0));
  }

  TEST_CASE("hash embedder is deterministic and unit-norm") {
    auto g = testutil::rng(409);
    Raster frame = testutil::random_raster(32, 24, 3, g);
    sed::HashEmbedder emb(64);
    auto a = emb.embed(frame);
    auto b = emb.embed(frame);
    CHECK(a.size() == 64);
    CHECK((a - b).norm() == 0.0f);
    CHECK(std::abs(a.norm() - 1.0f) < 1e-6);
  }

  TEST_CASE("slot: empty until written, then returns complete records") {
    AtomicSlot<SlotRecord> slot;
    CHECK(!slot.load().has_value());
    SlotRecord r;
    r.version = 1;
    r.clip_label = Condition::Snow;
    r.n_scores = 5;
    for (int i = 0; i < 5; ++i) r.clip_scores[i] = static_cast<float>(i);
    slot.store(r);
    auto got = slot.load();
    REQUIRE(got.has_value());
    CHECK(got->version == 1);
    CHECK(got->clip_label == Condition::Snow);
    CHECK(got->clip_scores[4] == doctest::Approx(4.0f));
  }

  TEST_CASE("slot: concurrent reader sees monotone versions, no torn records") {
    AtomicSlot<SlotRecord> slot;
    std::atomic<bool> stop{false};
    std::atomic<long> torn{0}, regress{0};
    std::thread reader([&] {
      std::uint64_t last = 0;
      while (!stop.load(std::memory_order_relaxed)) {
        auto r = slot.load();
        if (!r) continue;
        if (r->version < last) ++regress;
        last = r->version;
        // payload derived from version; any mismatch is a torn read
        for (int i = 0; i < 4; ++i)
          if (r->clip_scores[i] != static_cast<float>(r->version * (i + 1))) ++torn;
      }
    });
    for (std::uint64_t v = 1; v <= 20000; ++v) {
      SlotRecord r;
      r.version = v;
      for (int i = 0; i < 4; ++i) r.clip_scores[i] = static_cast<float>(v * (i + 1));
      slot.store(r);
    }
    stop = true;
    reader.join();
    CHECK(torn.load() == 0);
    CHECK(regress.load() == 0);
  }

  TEST_CASE("prompt files map line index to condition order") {
    const std::string path = "/tmp/cadenet_prompts_test.txt";
    std::remove(path.c_str());
    {
      std::FILE* f = std::fopen(path.c_str(), "w");
      std::fputs("rainy road\nfoggy road\nsandstorm\nsnowy road\nclear road\n", f);
      std::fclose(f);
    }
    auto prompts = sed::load_prompts(path);
    REQUIRE(prompts.size() == 5);
    CHECK(prompts[static_cast<int>(Condition::Fog)] == "foggy road");
    CHECK(prompts[static_cast<int>(Condition::Clear)] == "clear road");
    std::remove(path.c_str());
    CHECK(sed::default_prompts().size() == 5);
  }
}

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "symml/checkpoint.hpp"
#include "symml/errors.hpp"

using namespace symml;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name)
{
    return (fs::temp_directory_path() / ("symml_test_" + name)).string();
}

} // namespace

TEST_CASE("checkpoint text round trip is bit exact")
{
    Checkpoint c;
    c.model_kind = "asrnn";
    c.seed = 18446744073709551615ull;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 500; ++i)
        c.params.push_back(n(rng) * std::pow(10.0, i % 40 - 20));
    c.params.push_back(std::numeric_limits<double>::denorm_min());
    c.params.push_back(-0.0);
    c.params.push_back(0.1);
    c.params.push_back(std::nextafter(1.0, 2.0));
    c.metrics = {{"val_loss", 1.0 / 3.0}};
    const auto path = temp_path("ckpt.json");
    save_checkpoint(c, path);
    const auto back = load_checkpoint(path);
    REQUIRE(back.params.size() == c.params.size());
    for (std::size_t i = 0; i < c.params.size(); ++i)
        CHECK(std::bit_cast<std::uint64_t>(back.params[i]) == std::bit_cast<std::uint64_t>(c.params[i]));
    CHECK(back == c);
    fs::remove(path);
}

TEST_CASE("model checkpoints restore identical models")
{
    const auto sep = SeparableModel::create({12, 12}, 2, false, 3);
    const auto sep2 = separable_from_checkpoint(checkpoint_from_json(to_json(make_checkpoint(sep, 3))));
    CHECK(sep2.flat_params() == sep.flat_params());
    CHECK(sep2.potential.spec == sep.potential.spec);
    CHECK(sep2.kinetic.spec == sep.kinetic.spec);

    const auto fixed = SeparableModel::create({8}, 1, true, 4);
    const auto fixed2 = separable_from_checkpoint(make_checkpoint(fixed, 4));
    CHECK(fixed2.fixed_kinetic);
    CHECK(fixed2.flat_params() == fixed.flat_params());

    const auto hnn = HnnModel::create({10}, 1, 5);
    const auto ck = make_checkpoint(hnn, 5);
    CHECK(ck.model_kind == "ahnn");
    CHECK(hnn_from_checkpoint(ck).net.params == hnn.net.params);
    CHECK(make_checkpoint(HnnModel::create({10}, 0, 5), 5).model_kind == "hnn");

    const auto base = BaselineModel::create({10}, 1, 6);
    CHECK(baseline_from_checkpoint(make_checkpoint(base, 6)).net.params == base.net.params);

    const auto enc = EncoderModel::create(9, 1, 30, 7);
    const auto ec = make_checkpoint(enc, 7);
    CHECK(ec.model_kind == "lstm-encoder");
    const auto enc2 = encoder_from_checkpoint(ec);
    CHECK(enc2.flat_params() == enc.flat_params());
    CHECK(enc2.window_len == 30);

    CHECK_THROWS_AS(hnn_from_checkpoint(ec), InvalidArgument);
    Checkpoint broken = make_checkpoint(base, 6);
    broken.params.pop_back();
    CHECK_THROWS_AS(baseline_from_checkpoint(broken), ShapeMismatch);
}

TEST_CASE("checkpoint format errors")
{
    json j = to_json(make_checkpoint(BaselineModel::create({4}, 0, 1), 1));
    j["format_version"] = 99;
    CHECK_THROWS_AS(checkpoint_from_json(j), FormatVersionMismatch);
    j["format_version"] = kCheckpointFormatVersion;
    j["extra"] = true;
    CHECK_THROWS_AS(checkpoint_from_json(j), InvalidArgument);
    j.erase("extra");
    j.erase("params");
    CHECK_THROWS_AS(checkpoint_from_json(j), CorruptRecord);
}

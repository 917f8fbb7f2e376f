#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "symml/checkpoint.hpp"
#include "symml/cli.hpp"
#include "symml/data.hpp"

using namespace symml;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::set<std::string> listing(const fs::path& dir)
{
    std::set<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        names.insert(fs::relative(e.path(), dir).string());
    return names;
}

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() / ("symml_cli_" + std::to_string(std::rand()) + "_" +
                                            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream(path) << text;
}

const char* kTinyGen = R"({"alphas": [0.2, 0.8], "energies": ["1/24", "1/12"], "trajectories": 2,
                           "series_length": 120, "transient": 20, "seed": 5})";

} // namespace

TEST_CASE("generate writes a dataset with a metadata header and is byte-reproducible")
{
    TempDir tmp;
    write_file(tmp / "gen.json", kTinyGen);
    auto a = run({"generate", "--config", tmp / "gen.json", "--out", tmp / "a"});
    REQUIRE(a.code == 0);
    CHECK(a.out.find("# seed: 5") != std::string::npos);
    CHECK(a.out.find("trajectories 8") != std::string::npos);
    CHECK(a.out.find("states 800") != std::string::npos);

    const std::string summary = slurp(tmp / "a/dataset_summary.csv");
    CHECK(summary.rfind("# symml ", 0) == 0);
    CHECK(summary.find("# config_hash: ") != std::string::npos);
    CHECK(summary.find("alpha,beta,energy,trajectories,states\n") != std::string::npos);

    const auto data = load_dataset(tmp / "a/dataset.smlds");
    CHECK(data.records.size() == 8);
    CHECK(data.metadata.at("seed") == "5");
    CHECK(data.metadata.at("config_hash").size() == 8);

    // Same seed, different worker count: identical bytes.
    auto b = run({"generate", "--config", tmp / "gen.json", "--out", tmp / "b", "--jobs", "2"});
    REQUIRE(b.code == 0);
    CHECK(slurp(tmp / "a/dataset.smlds") == slurp(tmp / "b/dataset.smlds"));
    CHECK(slurp(tmp / "a/dataset_summary.csv") == slurp(tmp / "b/dataset_summary.csv"));
}

TEST_CASE("seed precedence: flag, then config, then environment")
{
    TempDir tmp;
    write_file(tmp / "noseed.json", R"({"alphas": [0.5], "energies": [0.05], "trajectories": 1,
                                        "series_length": 20, "transient": 2})");
    ::setenv(cli::kSeedEnv, "41", 1);
    auto env = run({"generate", "--config", tmp / "noseed.json", "--out", tmp / "env"});
    CHECK(env.code == 0);
    CHECK(env.out.find("# seed: 41") != std::string::npos);
    auto flag = run({"generate", "--config", tmp / "noseed.json", "--seed", "7", "--out", tmp / "flag"});
    CHECK(flag.out.find("# seed: 7") != std::string::npos);
    auto cfg = run({"generate", "--config", tmp / "gen_missing.json", "--out", tmp / "x"});
    CHECK(cfg.code == 1);
    ::setenv(cli::kSeedEnv, "not-a-number", 1);
    CHECK(run({"generate", "--config", tmp / "noseed.json", "--out", tmp / "bad"}).code == 1);
    ::unsetenv(cli::kSeedEnv);
    auto none = run({"generate", "--config", tmp / "noseed.json", "--out", tmp / "none"});
    CHECK(none.out.find("# seed: 0") != std::string::npos);
}

TEST_CASE("usage errors exit 1, runtime failures exit 2")
{
    TempDir tmp;
    write_file(tmp / "gen.json", kTinyGen);
    write_file(tmp / "junk.smlds", "not a dataset");

    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"train", "--model", "transformer", "--data", tmp / "junk.smlds"}).code == 1);
    CHECK(run({"lyapunov", "--grid", "0.1:0.5", "--out", tmp / "o"}).code == 1);
    CHECK(run({"generate", "--config", tmp / "gen.json", "--set", "colour=blue", "--out", tmp / "o"}).code == 1);
    CHECK(run({"generate", "--config", tmp / "gen.json", "--set", "noequals", "--out", tmp / "o"}).code == 1);
    auto help = run({"generate", "--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("--config") != std::string::npos);

    auto corrupt = run({"train", "--model", "asrnn", "--data", tmp / "junk.smlds", "--out", tmp / "o"});
    CHECK(corrupt.code == 2);
    CHECK(corrupt.err.find("CorruptRecord") != std::string::npos);
}

TEST_CASE("train, predict, eval-energy, poincare and lyapunov stay inside --out")
{
    TempDir tmp;
    write_file(tmp / "gen.json", kTinyGen);
    REQUIRE(run({"generate", "--config", tmp / "gen.json", "--out", tmp / "data"}).code == 0);
    const auto before = listing(tmp.path);

    auto tr = run({"train", "--model", "asrnn", "--data", tmp / "data/dataset.smlds", "--set", "epochs=2", "--set",
                   "hidden=[8]", "--set", "batch_size=16", "--out", tmp / "model"});
    REQUIRE(tr.code == 0);
    const Checkpoint ck = load_checkpoint(tmp / "model/checkpoint.json");
    CHECK(ck.model_kind == "asrnn");
    CHECK(ck.metadata.at("command") == "train");
    CHECK(ck.spec.at("param_channels") == 1);
    const std::string report = slurp(tmp / "model/train_report.csv");
    CHECK(report.find("epoch,train_loss,val_loss\n1,") != std::string::npos);

    auto pr = run({"predict", "--checkpoint", tmp / "model/checkpoint.json", "--alpha", "0.5", "--energy", "1/12",
                   "--steps", "20", "--out", tmp / "pred", "--seed", "3"});
    REQUIRE(pr.code == 0);
    const std::string traj = slurp(tmp / "pred/trajectory.csv");
    CHECK(traj.find("t,q_x,q_y,p_x,p_y,energy\n") != std::string::npos);
    std::size_t rows = 0;
    std::istringstream in(traj);
    for (std::string line; std::getline(in, line);)
        ++rows;
    CHECK(rows == 4 + 1 + 21);
    CHECK(slurp(tmp / "pred/energy_error.csv").find("t,percent\n0,0\n") != std::string::npos);

    auto pr2 = run({"predict", "--checkpoint", tmp / "model/checkpoint.json", "--alpha", "0.5", "--energy", "1/12",
                    "--steps", "20", "--out", tmp / "pred2", "--seed", "3"});
    CHECK(slurp(tmp / "pred/trajectory.csv") == slurp(tmp / "pred2/trajectory.csv"));

    auto ev = run({"eval-energy", "--checkpoint", tmp / "model/checkpoint.json", "--alpha", "0.3,0.5", "--energy",
                   "1/24", "--rollouts", "2", "--steps", "10", "--out", tmp / "eval"});
    CHECK(ev.code == 0);
    CHECK(slurp(tmp / "eval/energy_errors.csv").find("alpha,beta,energy,rollout,mean_percent,max_percent,secular,"
                                                     "diverged\n") != std::string::npos);

    auto po = run({"poincare", "--alpha", "1", "--energy", "1/8", "--ics", "2", "--time", "60", "--out",
                   tmp / "section"});
    CHECK(po.code == 0);
    CHECK(slurp(tmp / "section/section.csv").find("q_y,p_y\n") != std::string::npos);

    auto ly = run({"lyapunov", "--grid", "0.5:1.0:0.5", "--energy", "1/7", "--time", "20", "--out", tmp / "lyap"});
    REQUIRE(ly.code == 0);
    const std::string lyap = slurp(tmp / "lyap/lyapunov.csv");
    CHECK(lyap.find("alpha,beta,lambda_max\n0.5,0.5,") != std::string::npos);
    CHECK(lyap.find("\n1,1,") != std::string::npos);
    auto ly2 = run({"lyapunov", "--grid", "0.5:1.0:0.5", "--energy", "1/7", "--time", "20", "--out", tmp / "lyap2",
                    "--jobs", "2"});
    CHECK(slurp(tmp / "lyap/lyapunov.csv") == slurp(tmp / "lyap2/lyapunov.csv"));

    // Everything new lives under one of the --out directories.
    for (const auto& name : listing(tmp.path)) {
        if (before.count(name))
            continue;
        const std::string top = name.substr(0, name.find('/'));
        CHECK(std::set<std::string>{"model", "pred", "pred2", "eval", "section", "lyap", "lyap2"}.count(top) == 1);
    }
}

TEST_CASE("encoder training, infer-params and predict-partial")
{
    TempDir tmp;
    write_file(tmp / "gen.json", kTinyGen);
    REQUIRE(run({"generate", "--config", tmp / "gen.json", "--out", tmp / "data"}).code == 0);
    REQUIRE(run({"train", "--model", "encoder", "--data", tmp / "data/dataset.smlds", "--set", "epochs=1", "--stride",
                 "10", "--out", tmp / "enc"})
                .code == 0);
    REQUIRE(run({"train", "--model", "asrnn", "--data", tmp / "data/dataset.smlds", "--set", "epochs=1", "--set",
                 "hidden=[8]", "--out", tmp / "asrnn"})
                .code == 0);
    const Checkpoint enc = load_checkpoint(tmp / "enc/checkpoint.json");
    CHECK(enc.model_kind == "lstm-encoder");
    CHECK(enc.spec.at("window_len") == 30);

    auto in = run({"infer-params", "--encoder", tmp / "enc/checkpoint.json", "--data", tmp / "data/dataset.smlds",
                   "--out", tmp / "infer"});
    REQUIRE(in.code == 0);
    CHECK(in.out.find("alpha_mean ") != std::string::npos);
    const std::string per = slurp(tmp / "infer/infer_params.csv");
    CHECK(per.find("trajectory,alpha_true,beta_true,energy,param,mean,stddev,windows\n") != std::string::npos);
    // 100 stored states, window 30, stride 30: three windows per trajectory.
    CHECK(per.find(",alpha,") != std::string::npos);
    CHECK(per.find(",3\n") != std::string::npos);

    auto pp = run({"predict-partial", "--encoder", tmp / "enc/checkpoint.json", "--asrnn",
                   tmp / "asrnn/checkpoint.json", "--observe", "40", "--steps", "5", "--out", tmp / "partial"});
    CHECK(pp.code == 0);
    CHECK(slurp(tmp / "partial/partial_prediction.csv").find("t,q_x,q_y,p_x,p_y,energy\n") != std::string::npos);

    // An encoder is not a dynamics model.
    CHECK(run({"predict", "--checkpoint", tmp / "enc/checkpoint.json", "--out", tmp / "o"}).code == 1);
    CHECK(run({"predict-partial", "--encoder", tmp / "asrnn/checkpoint.json", "--asrnn",
               tmp / "asrnn/checkpoint.json", "--out", tmp / "o"})
              .code == 1);
}

TEST_CASE("the shipped paper config reproduces the dataset counts")
{
    TempDir tmp;
    auto r = run({"generate", "--config", std::string(SYMML_SOURCE_DIR) + "/configs/paper_single_param.json", "--out",
                  tmp / "paper"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("trajectories 800") != std::string::npos);
    CHECK(r.out.find("states 2000000") != std::string::npos);
}

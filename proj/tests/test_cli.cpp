#include "catspace/report.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sys/wait.h>

using testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run cli(const TempDir& dir, const std::string& args)
{
    const fs::path log = dir / "cli.log";
    const std::string cmd = std::string(CATSPACE_BIN) + " " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::slurp(log)};
}

}  // namespace

TEST_CASE("command line exit codes and outputs")
{
    TempDir dir("cli");
    const std::string data = (dir / "data").string();
    const std::string out = (dir / "out").string();

    CHECK(cli(dir, "synth --fixture --out " + data).code == 0);
    CHECK(fs::exists(dir / "data" / "planted.json"));

    const auto missing = cli(dir, "analyze table1 --data-dir " + (dir / "nowhere").string() + " --out " + out);
    CHECK(missing.code == 2);
    CHECK(missing.out.find("error:") != std::string::npos);

    CHECK(cli(dir, "analyze everything --data-dir " + data).code == 1);
    CHECK(cli(dir, "analyze all --data-dir " + data + " --k 0").code == 1);
    CHECK(cli(dir, "bogus").code == 1);
    CHECK(cli(dir, "--help").code == 0);

    const auto all = cli(dir, "analyze all --data-dir " + data + " --out " + out);
    CHECK(all.code == 0);
    const auto manifest = catspace::report::read_manifest(dir / "out" / "manifest.json");
    CHECK(manifest.files.size() == 6);

    const auto verify = cli(dir, "report --verify " + out);
    CHECK(verify.code == 0);
    CHECK(verify.out.find("FAIL") == std::string::npos);

    const std::string rerun = (dir / "rerun").string();
    CHECK(cli(dir, "report --config " + out + "/runconfig.json --out " + rerun + " --threads 3").code == 0);
    CHECK(testing::slurp(dir / "rerun" / "manifest.json") == testing::slurp(dir / "out" / "manifest.json"));

    testing::spit(dir / "out" / "table1.json", "{}");
    const auto tampered = cli(dir, "report --verify " + out);
    CHECK(tampered.code == 2);
    CHECK(tampered.out.find("FAIL  table1.json") != std::string::npos);

    const std::string pca = (dir / "pca").string();
    CHECK(cli(dir, "analyze pca --data-dir " + data + " --out " + pca + " --d 4 --sample-circles 6").code == 0);
    const auto doc = catspace::report::read_json_file(dir / "pca" / "pca.json");
    CHECK(doc.at("circles").size() == 7);

    CHECK(cli(dir, "serve --data-dir " + data + " --report " + (dir / "none").string()).code == 2);
    CHECK(cli(dir, "serve --data-dir " + data + " --report " + out + " --port 70000").code == 1);
}

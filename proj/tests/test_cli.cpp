#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "instances.hpp"
#include "sparse_sr/cli.hpp"
#include "sparse_sr/dictionary.hpp"
#include "sparse_sr/image.hpp"

using namespace sparse_sr;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

/// Scratch directory with one 64×64 texture, removed on destruction.
struct Workspace {
    fs::path root;
    fs::path images;

    explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / ("sparse_sr_cli_" + name))
    {
        fs::remove_all(root);
        images = root / "images";
        fs::create_directories(images);
        write_pgm(instance::texture(64, 64, 1), images / "texture.pgm");
    }
    ~Workspace() { fs::remove_all(root); }

    std::string path(const std::string& leaf) const { return (root / leaf).string(); }
};

std::string read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("usage errors exit with status 2")
{
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"train", "--out", "x.cdl"}).code == 2);  // missing --hr-dir

    const Run lasso = cli({"upscale", "--dict", "d", "--input", "i", "--solver", "lasso", "--output", "o"});
    CHECK(lasso.code == 2);
    CHECK(lasso.err.find("omp|ista|sl0|qp") != std::string::npos);

    CHECK(cli({"synth", "--k", "25", "--n", "20"}).code == 2);
    CHECK(cli({"train", "--hr-dir", ".", "--out", "x", "--stride", "9", "--patch-size", "8"}).code == 2);

    const Run help = cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("benchmark") != std::string::npos);
}

TEST_CASE("runtime failures exit with status 1")
{
    const Run missing = cli({"upscale", "--dict", "/nonexistent/d.cdl", "--input", "i.pgm", "--solver", "omp",
                             "--output", "o.pgm"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("/nonexistent/d.cdl") != std::string::npos);

    Workspace ws("empty");
    fs::remove(ws.images / "texture.pgm");
    CHECK(cli({"train", "--hr-dir", ws.images.string(), "--out", ws.path("d.cdl")}).code == 1);
}

TEST_CASE("train, then upscale with every solver")
{
    Workspace ws("train");
    const std::string dict = ws.path("d.cdl");
    const Run train = cli({"train", "--hr-dir", ws.images.string(), "--iters", "3", "--out", dict});
    REQUIRE_MESSAGE(train.code == 0, train.err);
    CHECK(train.out.find("final_error=") != std::string::npos);

    const CoupledDictionary cd = load_dictionary(dict);
    // 64×64 at p = 8, stride 4 gives 15² = 225 patches, fewer than the default 512 atoms
    CHECK(cd.atom_count() == 225);
    CHECK(cd.patch_size_hr == 8);
    CHECK(cd.overlap_hr == 4);
    CHECK(cd.scale == 2);

    const Raster hr = read_pgm(ws.images / "texture.pgm");
    write_pgm(degrade(hr, 2), ws.root / "lr.pgm");
    for (const char* solver : {"omp", "ista", "sl0", "qp"}) {
        CAPTURE(solver);
        const std::string output = ws.path(std::string("up_") + solver + ".pgm");
        const Run up = cli({"upscale", "--dict", dict, "--input", ws.path("lr.pgm"), "--solver", solver,
                            "--max-iters", "200", "--reference", (ws.images / "texture.pgm").string(), "--output",
                            output});
        REQUIRE_MESSAGE(up.code == 0, up.err);
        CHECK(up.out.rfind("psnr_db=", 0) == 0);
        const Raster out = read_pgm(output);
        CHECK(out.width() == 64);
        CHECK(out.height() == 64);
    }

    const Run same = cli({"upscale", "--dict", dict, "--input", ws.path("lr.pgm"), "--solver", "omp", "--reference",
                          ws.path("up_omp.pgm"), "--output", ws.path("again.pgm")});
    CHECK(same.out == "psnr_db=inf\n");
}

TEST_CASE("odd patch size is recorded in the dictionary")
{
    Workspace ws("odd");
    const std::string dict = ws.path("d9.cdl");
    const Run train = cli({"train", "--hr-dir", ws.images.string(), "--patch-size", "9", "--stride", "5", "--scale",
                           "2", "--atoms", "40", "--iters", "2", "--out", dict});
    REQUIRE_MESSAGE(train.code == 0, train.err);
    const CoupledDictionary cd = load_dictionary(dict);
    CHECK(cd.patch_size_hr == 9);
    CHECK(cd.overlap_hr == 4);
    CHECK(cd.d_hr.rows() == 81);
    CHECK(cd.d_lr.rows() == 324);
    CHECK(cd.atom_count() == 40);
}

TEST_CASE("benchmark writes identical csv on repeated runs")
{
    Workspace ws("bench");
    const std::string dict = ws.path("d.cdl");
    REQUIRE(cli({"train", "--hr-dir", ws.images.string(), "--atoms", "64", "--iters", "2", "--out", dict}).code == 0);
    const std::vector<std::string> args{"benchmark", "--dict", dict, "--images", ws.images.string(), "--solvers",
                                        "omp,sl0", "--seed", "0", "--csv"};
    auto first = args, second = args;
    first.push_back(ws.path("a.csv"));
    second.push_back(ws.path("b.csv"));
    const Run a = cli(first);
    REQUIRE_MESSAGE(a.code == 0, a.err);
    REQUIRE(cli(second).code == 0);
    CHECK(read_file(ws.path("a.csv")) == read_file(ws.path("b.csv")));
    CHECK(read_file(ws.path("a.csv")).rfind("solver,texture,average\nomp,", 0) == 0);

    CHECK(cli({"benchmark", "--dict", dict, "--images", ws.images.string(), "--solvers", "omp,lasso"}).code == 2);
}

TEST_CASE("synth prints one csv row per solver")
{
    const Run r = cli({"synth", "--n", "20", "--m", "50", "--k", "2", "--trials", "10", "--solvers", "omp,SL0"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.rfind("solver,success_rate,mean_rel_error,mean_runtime_ms\nomp,", 0) == 0);
    CHECK(r.out.find("\nsl0,") != std::string::npos);

    const Run zero = cli({"synth", "--k", "0", "--trials", "3"});
    REQUIRE(zero.code == 0);
    CHECK(zero.out.find("omp,1.0000,") != std::string::npos);
    CHECK(zero.out.find("qp,1.0000,") != std::string::npos);
}

#include "roughwave/commands.hpp"
#include "roughwave/csv.hpp"
#include "roughwave/plot_script.hpp"
#include "roughwave/scenario.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace roughwave;
namespace fs = std::filesystem;

namespace {

const std::string base_text = "model = M1\nkappa_minus = 2\nkappa_plus = 1\nfbar = 0.1875\ncase = A1\n";

Errc parse_error_code(const std::string& text, std::string* key = nullptr)
{
    try {
        parse_scenario(text);
    } catch (const Error& e) {
        if (key)
            *key = e.key();
        return e.code();
    }
    ADD_FAILURE() << "no error for:\n" << text;
    return Errc::precondition;
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("roughwave_cli_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args, const fs::path& dir)
{
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd =
        std::string(ROUGHWAVE_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_cfg(const fs::path& dir, const std::string& text)
{
    const fs::path p = dir / "scenario.cfg";
    write_text(p, text);
    return p;
}

} // namespace

TEST(ScenarioParse, DefaultsAndComments)
{
    const Scenario s = parse_scenario("# comment\n\n" + base_text + "dx = 0.005 # trailing\n");
    EXPECT_EQ(s.model, Model::m1);
    EXPECT_DOUBLE_EQ(s.cfl, 0.4);
    EXPECT_EQ(s.kernel, "linear");
    EXPECT_EQ(s.velocity, "lwr");
    EXPECT_DOUBLE_EQ(s.h, 0.2);
    EXPECT_EQ(s.case_label, "A1");
    ASSERT_TRUE(s.fbar);
    EXPECT_DOUBLE_EQ(*s.fbar, 0.1875);
}

TEST(ScenarioParse, NonIntegralHorizonRatioNamesDx)
{
    std::string key;
    EXPECT_EQ(parse_error_code(base_text + "h = 0.2\ndx = 0.03\n", &key), Errc::config);
    EXPECT_EQ(key, "dx");
}

TEST(ScenarioParse, DensityOutOfRangeNamesKey)
{
    std::string key;
    EXPECT_EQ(parse_error_code("rho_minus = 1.2\nrho_plus = 0.5\n", &key), Errc::config);
    EXPECT_EQ(key, "rho_minus");
    EXPECT_EQ(parse_error_code("rho_minus = 0.2\n", &key), Errc::config);
    EXPECT_EQ(key, "rho_plus");
}

TEST(ScenarioParse, UnknownDuplicateAndMalformed)
{
    std::string key;
    EXPECT_EQ(parse_error_code(base_text + "speed = 3\n", &key), Errc::config);
    EXPECT_EQ(key, "speed");
    EXPECT_EQ(parse_error_code(base_text + "cfl = 0.3\ncfl = 0.2\n", &key), Errc::config);
    EXPECT_EQ(key, "cfl");
    EXPECT_EQ(parse_error_code(base_text + "cfl = fast\n", &key), Errc::config);
    EXPECT_EQ(key, "cfl");
    EXPECT_EQ(parse_error_code(base_text + "cfl = 0.7\n", &key), Errc::config);
    EXPECT_EQ(key, "cfl");
    EXPECT_EQ(parse_error_code(base_text + "just words\n"), Errc::config);
    EXPECT_EQ(parse_error_code("model = M3\n", &key), Errc::config);
    EXPECT_EQ(key, "model");
    EXPECT_EQ(parse_error_code("model = M1\nfbar = 0.1875\ncase = E7\n", &key), Errc::config);
    EXPECT_EQ(key, "case");
    EXPECT_EQ(parse_error_code(base_text + "velocity = cubic\n", &key), Errc::config);
    EXPECT_EQ(key, "velocity");
}

TEST(ScenarioParse, MissingFarFieldNeedsFbarAndCase)
{
    std::string key;
    EXPECT_EQ(parse_error_code("model = M1\n", &key), Errc::config);
    EXPECT_EQ(key, "fbar");
    EXPECT_EQ(parse_error_code("model = M1\nfbar = 0.1\n", &key), Errc::config);
    EXPECT_EQ(key, "case");
}

TEST(ScenarioParse, SerializeRoundTrips)
{
    Scenario s = parse_scenario(base_text);
    EXPECT_EQ(parse_scenario(serialize(s)), s);
    s.model = Model::m2;
    s.case_label = "C1";
    s.traces = {0.45, 0.1 + 0.2, 0.75};
    s.snapshot_times = {0.0, 1.0 / 3.0, 20.0};
    s.scheme = Scheme::lax_friedrichs;
    s.dx = 0.2 / 64;
    s.cfl = 0.35;
    s.kernel = "quadratic";
    s.output_dir = "out/dir with space";
    EXPECT_EQ(parse_scenario(serialize(s)), s);
    Scenario explicit_states = s;
    explicit_states.rho_minus = 0.25;
    explicit_states.rho_plus = 0.75;
    explicit_states.fbar.reset();
    explicit_states.case_label.clear();
    EXPECT_EQ(parse_scenario(serialize(explicit_states)), explicit_states);
}

TEST(ScenarioParse, FormatDoubleRoundTrips)
{
    for (double x : {0.1, 1.0 / 3.0, 0.104715292478953, 1e-17, 12345.678, 0.0})
        EXPECT_EQ(std::stod(format_double(x)), x);
    EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(ScenarioResolve, CaseLabelGivesFarFieldStates)
{
    const ResolvedScenario r = resolve(parse_scenario(base_text));
    EXPECT_NEAR(r.inputs.rho_minus, 0.104715292478953, 1e-12);
    EXPECT_NEAR(r.inputs.rho_plus, 0.75, 1e-12);
    EXPECT_EQ(r.inputs.tag().label, "A1");
}

TEST(ScenarioOverrides, DxOverrideRevalidates)
{
    const Scenario s = parse_scenario(base_text);
    CommandOptions opt;
    opt.dx = 0.01;
    opt.out_dir = "elsewhere";
    const Scenario t = apply_overrides(s, opt);
    EXPECT_DOUBLE_EQ(t.dx, 0.01);
    EXPECT_EQ(t.output_dir, "elsewhere");
    opt.dx = 0.03;
    try {
        apply_overrides(s, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.key(), "dx");
    }
}

TEST(ExitCodes, MappingAndErrorLine)
{
    EXPECT_EQ(exit_code_for(Errc::config), 2);
    EXPECT_EQ(exit_code_for(Errc::missing_file), 2);
    EXPECT_EQ(exit_code_for(Errc::no_profile), 3);
    EXPECT_EQ(exit_code_for(Errc::blowup), 3);
    const std::string line = error_line(Error(Errc::config, "bad", "dx"));
    ASSERT_EQ(line.rfind("error ", 0), 0u);
    const auto j = nlohmann::json::parse(line.substr(6));
    EXPECT_EQ(j.at("code"), "config");
    EXPECT_EQ(j.at("key"), "dx");
    EXPECT_EQ(line.find('\n'), std::string::npos);
}

TEST(ProfileCsv, JumpNodeWrittenTwiceForFirstModel)
{
    const ResolvedScenario r = resolve(parse_scenario(base_text + "x_min = -1\nx_max = 1\n"));
    const FamilyResult f = case_profiles(r.inputs, {0.55});
    ASSERT_EQ(f.profiles.size(), 1u);
    const Profile& p = f.profiles.front();
    std::stringstream csv;
    write_profile_csv(csv, p);
    const CsvTable t = read_csv(csv);
    EXPECT_EQ(t.header_lines, 3u);
    ASSERT_EQ(t.comments.size(), 2u);
    EXPECT_EQ(t.comments[0], "model,fbar,case,trace_minus,trace_plus");
    EXPECT_EQ(t.comments[1].rfind("M1,0.1875,A1,", 0), 0u);
    EXPECT_EQ(t.columns, (std::vector<std::string>{"x", "Q"}));
    ASSERT_EQ(t.x.size(), p.grid.values.size() + 1);
    std::size_t zeros = 0;
    for (std::size_t k = 0; k < t.x.size(); ++k) {
        if (t.x[k] == 0.0) {
            if (zeros == 0) {
                EXPECT_EQ(t.y[k], *p.grid.left_trace_at_zero);
                EXPECT_NEAR(t.y[k], p.trace_minus, 1e-9);
            } else {
                EXPECT_EQ(t.y[k], p.grid.values[static_cast<std::size_t>(*p.grid.zero_index())]);
                EXPECT_NEAR(t.y[k], p.trace_plus, 1e-9);
            }
            ++zeros;
        }
    }
    EXPECT_EQ(zeros, 2u);
    EXPECT_DOUBLE_EQ(t.x.front(), -1.0);
    EXPECT_DOUBLE_EQ(t.x.back(), 1.0);
}

TEST(ProfileCsv, SecondModelHasSingleZeroRowAndKinkLine)
{
    const std::string text =
        "model = M2\nkappa_minus = 2\nkappa_plus = 1\nfbar = 0.1875\ncase = C1\nx_min = -1\nx_max = 1\n";
    const ResolvedScenario r = resolve(parse_scenario(text));
    const FamilyResult f = case_profiles(r.inputs, {0.6});
    ASSERT_EQ(f.profiles.size(), 1u);
    const fs::path dir = scratch("m2csv");
    const auto paths = write_profiles(dir, f.profiles, r.inputs, "C1");
    ASSERT_EQ(paths.size(), 1u);
    EXPECT_EQ(paths.front().filename(), "profile.csv");
    const CsvTable t = read_csv(paths.front());
    EXPECT_EQ(t.header_lines, 4u);
    ASSERT_EQ(t.comments.size(), 3u);
    EXPECT_EQ(t.comments[2].rfind("kink left_slope=", 0), 0u);
    EXPECT_NE(t.comments[2].find("relative_error="), std::string::npos);
    EXPECT_EQ(std::count(t.x.begin(), t.x.end(), 0.0), 1);
    EXPECT_TRUE(fs::exists(dir / "profiles.gp"));
}

TEST(SnapshotCsv, RoundTripsCellCentres)
{
    SimGrid grid;
    grid.x_min = -1.0;
    grid.x_max = 1.0;
    grid.dx = 0.005;
    const SimState s = riemann_initial(0.2, 0.8, grid);
    std::stringstream csv;
    write_snapshot_csv(csv, s);
    const CsvTable t = read_csv(csv);
    EXPECT_EQ(t.comments.front(), "t=0");
    EXPECT_EQ(t.columns, (std::vector<std::string>{"x", "rho"}));
    ASSERT_EQ(t.x.size(), s.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
        EXPECT_EQ(t.x[j], s.x_center(j));
        EXPECT_EQ(t.y[j], s.cells[j]);
    }
}

TEST(ReadCsv, RejectsMalformedRows)
{
    std::stringstream a("x,Q\n0.1,0.2,0.3\n");
    EXPECT_THROW(read_csv(a), Error);
    std::stringstream b("x,Q\n0.1,abc\n");
    EXPECT_THROW(read_csv(b), Error);
    std::stringstream c("# only comments\n");
    EXPECT_THROW(read_csv(c), Error);
    EXPECT_THROW(read_csv(fs::path("/nonexistent/file.csv")), Error);
}

TEST(PlotScript, ErrorsOnEmptyOrMissingArtifacts)
{
    try {
        plot_script_text({}, PlotStyle::snapshots, "x.gp", "t");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::precondition);
    }
    try {
        plot_script_text({"/nonexistent/a.csv"}, PlotStyle::snapshots, "x.gp", "t");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::missing_file);
    }
}

TEST(PlotScript, ProfilesSplitAtZeroAndSnapshotsLabelled)
{
    const fs::path dir = scratch("plot");
    const ResolvedScenario r = resolve(parse_scenario(base_text + "x_min = -1\nx_max = 1\n"));
    const FamilyResult f = case_profiles(r.inputs, {0.45, 0.7});
    const auto paths = write_profiles(dir, f.profiles, r.inputs, "A1 profiles");
    ASSERT_EQ(paths.size(), 2u);
    const std::string gp = slurp(dir / "profiles.gp");
    EXPECT_NE(gp.find("set arrow from 0, graph 0 to 0, graph 1"), std::string::npos);
    EXPECT_NE(gp.find("'profile_00.csv'"), std::string::npos);
    EXPECT_NE(gp.find("'profile_01.csv'"), std::string::npos);
    EXPECT_NE(gp.find("column(0) <="), std::string::npos);
    EXPECT_NE(gp.find("column(0) >="), std::string::npos);

    SimGrid grid;
    grid.x_min = -1.0;
    grid.x_max = 1.0;
    grid.dx = 0.005;
    std::vector<fs::path> snaps;
    for (int k = 0; k < 4; ++k) {
        SimState s = riemann_initial(0.2, 0.8, grid);
        s.t = 5.0 * k;
        snaps.push_back(dir / ("snap_" + std::to_string(k) + ".csv"));
        write_file(snaps.back(), [&](std::ostream& o) { write_snapshot_csv(o, s); });
    }
    const std::string sg = plot_script_text(snaps, PlotStyle::snapshots, dir / "snapshots.gp", "run");
    for (const char* label : {"'t=0'", "'t=5'", "'t=10'", "'t=15'"})
        EXPECT_NE(sg.find(label), std::string::npos) << label;
    EXPECT_EQ(sg.find("set arrow"), std::string::npos);
}

TEST(Commands, ClassifyReportsTag)
{
    std::ostringstream out;
    cmd_classify(parse_scenario(base_text), out);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "A1 | infinite | stable");
    EXPECT_NE(out.str().find("rho1=0.10471529"), std::string::npos);
}

TEST(Commands, FamilyReportStatesNonCrossing)
{
    const fs::path dir = scratch("family");
    Scenario s = parse_scenario(base_text + "traces = 0.4, 0.55, 0.7\n");
    s.output_dir = dir.string();
    std::ostringstream out, err;
    EXPECT_EQ(run_command("family", s, {}, out, err), 0) << err.str();
    EXPECT_NE(out.str().find("profiles: 3"), std::string::npos);
    EXPECT_NE(out.str().find("non-crossing: true"), std::string::npos);
    EXPECT_EQ(slurp(dir / "report.txt"), out.str());
}

TEST(Commands, NoProfileCaseIsNumericalFailure)
{
    Scenario s = parse_scenario("model = M1\nkappa_minus = 2\nkappa_plus = 1\nfbar = 0.1875\ncase = A3\n");
    s.output_dir = scratch("a3").string();
    std::ostringstream out, err;
    EXPECT_EQ(run_command("family", s, {}, out, err), 3);
    EXPECT_NE(err.str().find("\"code\":\"no_profile\""), std::string::npos);
    EXPECT_EQ(run_command("launch", s, {}, out, err), 2);
}

TEST(Commands, SimulateWritesSnapshotsAndDiagnostics)
{
    const fs::path dir = scratch("simulate");
    Scenario s = parse_scenario(base_text + "sim_x_min = -1\nsim_x_max = 1\nt_final = 0.5\n"
                                            "snapshot_times = 0, 0.25, 0.5\n");
    const nlohmann::json diag = run_simulation(s, dir, 1);
    EXPECT_LT(diag.at("max_mass_balance_error").get<double>(), 1e-12);
    EXPECT_GE(diag.at("min_density").get<double>(), 0.0);
    EXPECT_LE(diag.at("max_density").get<double>(), 1.0);
    EXPECT_EQ(diag.at("phi_spread").size(), 3u);
    for (const char* f : {"snapshot_000.csv", "snapshot_001.csv", "snapshot_002.csv", "snapshots.gp", "run.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto run = nlohmann::json::parse(slurp(dir / "run.json"));
    EXPECT_EQ(parse_scenario(run.at("scenario").get<std::string>()), s);
}

TEST(Sweep, MarkersMatchTagsAndManifestValidates)
{
    const fs::path dir = scratch("sweep");
    Scenario base = parse_scenario("fbar = 0.1875\ncase = A1\ndx = 0.01\nsim_x_min = -2\nsim_x_max = 2\n"
                                   "t_final = 0.2\nsnapshot_times = 0, 0.2\n");
    base.output_dir = dir.string();
    CommandOptions opt;
    opt.quiet = true;
    std::ostringstream out;
    const nlohmann::json manifest = cmd_sweep(base, opt, out);
    ASSERT_EQ(manifest.at("cases").size(), 16u);
    for (const Scenario& s : sweep_scenarios(base)) {
        const CaseTag tag = resolve(s).inputs.tag();
        for (const std::string& m : case_markers(tag))
            EXPECT_TRUE(fs::exists(fs::path(s.output_dir) / m)) << s.case_label << " " << m;
        EXPECT_EQ(fs::exists(fs::path(s.output_dir) / "no_stationary_profile"), tag.multiplicity == Multiplicity::none)
            << s.case_label;
    }
    EXPECT_TRUE(validate_manifest(dir).empty());

    write_text(dir / "A1" / "stray.txt", "x");
    write_text(dir / "B2" / "scenario.cfg", "tampered\n");
    const auto problems = validate_manifest(dir);
    EXPECT_EQ(problems.size(), 2u);
}

TEST(Cli, ExitCodesAndMessages)
{
    const fs::path dir = scratch("cli");
    const fs::path scen = fs::path(ROUGHWAVE_SCENARIO_DIR);

    RunResult r = run_cli("classify --config " + (scen / "a1_family.cfg").string(), dir);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("A1 | infinite | stable\n", 0), 0u) << r.out;

    r = run_cli("classify --config " + (dir / "missing.cfg").string(), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("\"code\":\"missing_file\""), std::string::npos) << r.err;

    r = run_cli("classify --config " + (scen / "a1_family.cfg").string() + " --dx 0.03", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("\"key\":\"dx\""), std::string::npos) << r.err;

    const fs::path bad = write_cfg(dir, base_text + "rho_minus = 1.2\nrho_plus = 0.5\n");
    r = run_cli("classify --config " + bad.string(), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("\"key\":\"rho_minus\""), std::string::npos) << r.err;

    const fs::path a3 = write_cfg(dir, "model = M1\nkappa_minus = 2\nkappa_plus = 1\nfbar = 0.1875\ncase = A3\n");
    r = run_cli("family --config " + a3.string() + " --out " + (dir / "a3").string(), dir);
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("no_profile"), std::string::npos) << r.err;

    r = run_cli("frobnicate", dir);
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, ProfileRunsAreByteIdentical)
{
    const fs::path dir = scratch("determinism");
    const fs::path cfg = fs::path(ROUGHWAVE_SCENARIO_DIR) / "a2_profile.cfg";
    for (const char* run : {"run1", "run2"}) {
        const RunResult r = run_cli("profile --quiet --config " + cfg.string() + " --out " + (dir / run).string(), dir);
        ASSERT_EQ(r.code, 0) << r.err;
        EXPECT_TRUE(r.out.empty());
    }
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "run1")) {
        ++files;
        EXPECT_EQ(slurp(e.path()), slurp(dir / "run2" / e.path().filename())) << e.path();
    }
    EXPECT_GE(files, 3u);
}

from unittest.mock import Mock, patch

import pandas as pd
import pytest

from config import Config
from database import init_database, get_session, get_db_session, close_database
from errors import SSLassoError
from models.experiment import ExperimentConfig
from models.reports import BoundCheck, ComparisonReport, CoverageReport, TrialReport
from repositories.campaign_repository import CampaignRepository
from services.campaign_service import CampaignService, TRIAL_LEADING_COLUMNS


def make_trial(index, covered=True):
    return TrialReport(
        trial_index=index, seed=100 + index, theorem='T1', variant='transductive', lam=0.5,
        excess_risk=0.2, transductive_risk=0.1, risk=0.1, rhs_bound=0.3 if covered else 0.05, covered=covered,
        kkt_residual=1e-9, sweeps=4, valid=True, candidate_beta=(1.0, 0.0), candidate_J=(0,),
        cone_constant_used=1.0, diagnostics={'zeta1': BoundCheck(0.1, 0.2, True)},
    )


def make_report(theorem='T1', master_seed=7, passed=True):
    trials = (make_trial(0), make_trial(1, covered=passed))
    return CoverageReport(
        theorem=theorem, master_seed=master_seed, trials=2, coverage=1.0 if passed else 0.5, delta=0.1,
        slack=0.05, passed=passed, seeds=(100, 101), trial_reports=trials,
    )


@pytest.fixture
def config():
    return ExperimentConfig(theorem='T1', p=2, n=4, N=10, s_star=1, trials=2, master_seed=7)


@pytest.fixture
def repo(tmp_path):
    assert init_database(f"sqlite:///{tmp_path / 'results.db'}")
    yield CampaignRepository(get_session())
    close_database()


class TestCampaignRepository:

    def test_store_and_find(self, repo, config):
        campaign = repo.create_campaign(make_report(), config=config.to_dict())
        assert campaign is not None and campaign.id is not None
        assert repo.add_trials(campaign, list(make_report().trial_reports)) == 2

        found = repo.find_by_master_seed('T1', 7)
        assert found.id == campaign.id
        assert found.config['N'] == 10
        assert [t.trial_index for t in found.trial_records] == [0, 1]
        assert found.trial_records[0].to_dict()['lambda'] == 0.5
        assert repo.find_by_master_seed('T1', 8) is None

    def test_statistics(self, repo):
        repo.create_campaign(make_report())
        repo.create_campaign(make_report(passed=False))
        repo.create_campaign(make_report(theorem='T3', master_seed=1))
        assert repo.count_failed() == 1
        stats = repo.coverage_by_theorem()
        assert stats['T1'] == {'campaigns': 2, 'mean_coverage': 0.75}
        assert stats['T3']['campaigns'] == 1
        assert [c.theorem for c in repo.find_recent(limit=2)] == ['T3', 'T1']

    def test_session_scope_reraises_after_commit(self, repo, config):
        with pytest.raises(RuntimeError):
            with get_db_session() as session:
                CampaignRepository(session).create_campaign(make_report(), config=config.to_dict())
                raise RuntimeError('abort')
        with get_db_session() as session:
            assert CampaignRepository(session).find_by_master_seed('T1', 7) is not None


class TestResultsStore:

    def test_creates_sqlite_directory(self, tmp_path):
        path = tmp_path / 'runs' / 'nested' / 'results.db'
        try:
            assert init_database(f"sqlite:///{path}")
            assert path.exists()
        finally:
            close_database()

    def test_trials_need_a_stored_campaign(self, repo):
        assert repo.add_trials(Mock(id=999), [make_trial(0)]) == 0

    def test_unknown_backend(self):
        assert not init_database('nosuchdialect://host/db')

    def test_no_url(self):
        with patch.object(Config, 'RESULTS_DATABASE_URL', None):
            assert not init_database()


class TestCampaignService:

    def test_run_stores_when_repository_attached(self, config):
        repo = Mock()
        repo.add_trials.return_value = 2
        report = make_report()
        with patch('services.campaign_service.run_monte_carlo', return_value=report) as run:
            assert CampaignService(repo).run(config, trials=2, jobs=3) is report
        run.assert_called_once_with(config, trials=2, master_seed=None, jobs=3)
        repo.create_campaign.assert_called_once_with(report, config=config.to_dict())
        repo.add_trials.assert_called_once()

    def test_run_without_repository(self, config):
        with patch('services.campaign_service.run_monte_carlo', return_value=make_report()):
            CampaignService().run(config)

    @pytest.mark.parametrize('created, added, expected', [
        (Mock(id=1), 2, True),
        (Mock(id=1), 1, False),
        (None, 2, False),
    ])
    def test_store_result(self, config, created, added, expected):
        repo = Mock()
        repo.create_campaign.return_value = created
        repo.add_trials.return_value = added
        assert CampaignService(repo).store(make_report(), config) is expected

    def test_store_swallows_errors(self, config):
        repo = Mock()
        repo.create_campaign.side_effect = RuntimeError('disk full')
        assert CampaignService(repo).store(make_report(), config) is False

    def test_history_from_repository(self, repo, config):
        service = CampaignService(repo)
        assert service.store(make_report(), config)
        assert service.store(make_report(theorem='T3', master_seed=2, passed=False), config)
        history = service.history(limit=1)
        assert history['failed_campaigns'] == 1
        assert history['coverage_by_theorem']['T3'] == {'campaigns': 1, 'mean_coverage': 0.5}
        assert [c['theorem'] for c in history['recent']] == ['T3']

    def test_history_needs_repository(self):
        with pytest.raises(SSLassoError):
            CampaignService().history()

    def test_export_trials_csv(self, tmp_path):
        path = str(tmp_path / 'trials.csv')
        CampaignService.export_csv(make_report(passed=False), path)
        frame = pd.read_csv(path)
        assert tuple(frame.columns[:len(TRIAL_LEADING_COLUMNS)]) == TRIAL_LEADING_COLUMNS
        assert list(frame['covered']) == [True, False]
        assert 'diag_zeta1_holds' in frame.columns

    def test_export_comparison_csv(self, tmp_path):
        path = str(tmp_path / 'paired.csv')
        report = ComparisonReport(
            variants=('semisupervised', 'supervised'), master_seed=0, trials=1, medians=(0.1, 0.2),
            win_fraction=1.0, passed=True,
            rows=({'supervised': 0.2, 'semisupervised': 0.1, 'seed': 5, 'trial_index': 0},),
        )
        CampaignService.export_csv(report, path)
        assert list(pd.read_csv(path).columns) == ['trial_index', 'seed', 'supervised', 'semisupervised']

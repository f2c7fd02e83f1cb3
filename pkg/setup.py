from setuptools import setup, find_packages
import json

if __name__ == '__main__':
    # Package metadata lives in setup.json
    with open('setup.json', 'r', encoding='utf-8') as info:
        kwargs = json.load(info)
    with open('README.md', 'r', encoding='utf-8') as readme:
        long_description = readme.read()
    setup(packages=find_packages(exclude=['tests*', 'docs*', 'examples*']),
          long_description=long_description,
          long_description_content_type='text/markdown',
          **kwargs)
